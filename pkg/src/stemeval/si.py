"""Scale-invariant energy-ratio metrics on mono signals.

The estimate is decomposed against a set of reference sources: the
optimal scaling factor alpha = <estimate, s>/||s||^2 defines the target
part alpha*s; the orthogonal projection of the estimate onto the span
of all references (one scalar coefficient per reference, no filtering)
splits the residual into an interference part inside the span and an
artifact part orthogonal to it.  SI-SDR, SI-SIR and SI-SAR are energy
ratios over these parts; the reweighted variant interpolates between
SI-SIR and SI-SAR through a geometric weighting of the two error
energies.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateReferenceError, DependentReferencesError, ParameterError
from .values import COND_LIMIT, EPS_ZERO, MetricValue, PERFECT_FIT, energy_ratio_db


def _as_signal(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a mono signal, got shape {arr.shape}")
    if arr.size < 2:
        raise ParameterError(f"{name} must have length >= 2, got {arr.size}")
    return arr


@dataclass(frozen=True)
class SIDecomposition:
    """Split of an estimate into scaled target, interference, artifact.

    Invariants: e_target = alpha * reference; the three parts sum back
    to the estimate; e_artifact is orthogonal to every reference.
    """

    alpha: float
    e_target: np.ndarray
    e_interference: np.ndarray
    e_artifact: np.ndarray

    @cached_property
    def target_energy(self) -> float:
        return float(np.dot(self.e_target, self.e_target))

    @cached_property
    def interference_energy(self) -> float:
        return float(np.dot(self.e_interference, self.e_interference))

    @cached_property
    def artifact_energy(self) -> float:
        return float(np.dot(self.e_artifact, self.e_artifact))

    @property
    def estimate(self) -> np.ndarray:
        return self.e_target + self.e_interference + self.e_artifact


@dataclass(frozen=True)
class SIMetrics:
    si_sdr: MetricValue
    si_sir: MetricValue
    si_sar: MetricValue
    sd_sdr: MetricValue

    def as_dict(self) -> dict[str, MetricValue]:
        return {
            "SI-SDR": self.si_sdr,
            "SI-SIR": self.si_sir,
            "SI-SAR": self.si_sar,
            "SD-SDR": self.sd_sdr,
        }


def si_decompose(estimate, references, target_index: int) -> SIDecomposition:
    """Decompose ``estimate`` against ``references[target_index]``.

    Parameters
    ----------
    estimate : mono signal
    references : ordered list of mono signals, all the same length as
        the estimate; must be linearly independent
    target_index : which reference is the target source

    Returns
    -------
    SIDecomposition

    Raises
    ------
    DegenerateReferenceError
        The target reference has (numerically) zero energy.
    DependentReferencesError
        The reference Gram matrix has condition number above 1e12.
    """
    est = _as_signal(estimate, "estimate")
    if not references:
        raise ParameterError("need at least one reference")
    refs = [_as_signal(r, f"references[{i}]") for i, r in enumerate(references)]
    if not 0 <= target_index < len(refs):
        raise ParameterError(f"target_index {target_index} out of range")
    lengths = {r.size for r in refs} | {est.size}
    if len(lengths) > 1:
        raise ParameterError(f"signals have mixed lengths {sorted(lengths)}")

    ref_matrix = np.stack(refs)
    gram = ref_matrix @ ref_matrix.T
    dots = ref_matrix @ est

    target_energy = gram[target_index, target_index]
    est_energy = float(np.dot(est, est))
    if target_energy <= 0.0 or target_energy < EPS_ZERO * est_energy:
        raise DegenerateReferenceError(
            f"reference {target_index} has negligible energy ({target_energy:g})"
        )
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DependentReferencesError(
            f"reference Gram matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}"
        )

    coeffs = np.linalg.solve(gram, dots)
    alpha = float(dots[target_index] / target_energy)
    projection = coeffs @ ref_matrix
    e_target = alpha * refs[target_index]
    return SIDecomposition(
        alpha=alpha,
        e_target=e_target,
        e_interference=projection - e_target,
        e_artifact=est - projection,
    )


def si_metrics(d: SIDecomposition, estimate, s_target) -> SIMetrics:
    """Scale-invariant SDR/SIR/SAR plus scale-dependent SDR.

    All four are 10*log10 energy ratios over the decomposition parts;
    SD-SDR keeps the scaled target in the numerator but measures the
    raw error ||estimate - s_target||^2, so it is *not* scale
    invariant.  Denominators below EPS_ZERO times the target energy
    yield PERFECT_FIT.
    """
    est = _as_signal(estimate, "estimate")
    ref = _as_signal(s_target, "s_target")
    target_energy = d.target_energy
    residual = d.e_interference + d.e_artifact
    return SIMetrics(
        si_sdr=energy_ratio_db(target_energy, float(np.dot(residual, residual))),
        si_sir=energy_ratio_db(target_energy, d.interference_energy),
        si_sar=energy_ratio_db(target_energy, d.artifact_energy),
        sd_sdr=energy_ratio_db(
            target_energy, float(np.sum((est - ref) ** 2)), zero_ref=target_energy
        ),
    )


def reweighted_db(target_energy: float, interference_energy: float,
                  artifact_energy: float, w: float) -> MetricValue:
    """Reweighted ratio 10*log10(E_t / (E_i**w * E_a**(1-w))).

    Evaluated as w*SI-SIR + (1-w)*SI-SAR in dB, which is algebraically
    identical and makes the w=0 / w=1 endpoints coincide exactly with
    SI-SAR / SI-SIR.  If any active denominator factor vanishes the
    value is PERFECT_FIT.
    """
    if not 0.0 <= w <= 1.0:
        raise ParameterError(f"weight w must be in [0, 1], got {w}")
    sir = energy_ratio_db(target_energy, interference_energy)
    sar = energy_ratio_db(target_energy, artifact_energy)
    if w == 1.0:
        return sir
    if w == 0.0:
        return sar
    if sir == PERFECT_FIT or sar == PERFECT_FIT:
        return PERFECT_FIT
    return w * sir + (1.0 - w) * sar


def reweighted_si_sdr(d: SIDecomposition, w: float) -> MetricValue:
    """Geometric reweighting of a decomposition's error energies."""
    return reweighted_db(d.target_energy, d.interference_energy,
                         d.artifact_energy, w)
