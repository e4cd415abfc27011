"""Stability and instability certificates for the hybrid system.

Certificates combine grid evidence: a drift-condition scan L_i V <= c_i g(V)
(or the reversed inequality for instability), the averaged coefficient
sum c_i nu_i over a chain truncation with a conservative tail bound, tail
behavior of the c_i sequence, finiteness of M_g = sup |V_x sigma / g(V)|,
and continuity of the switching kernel at the origin.  Numeric scans are
grid evidence, not proof; every report carries its cutoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .markov_chain import ErgodicityDiagnostic, InvariantMeasure
from .model import (
    LyapunovSpec,
    ModelSpec,
    RateKernel,
    _fd_gradient,
    radial_grid,
)

K_SCAN_FLOOR = 100
K_SCAN_FACTOR = 4
MG_GROWTH_FACTOR = 30.0  # small-radius blow-up threshold for the M_g scan
KERNEL_VANISH_ABS = 1e-6
KERNEL_VANISH_REL = 1e-2
ERGODIC_RESIDUAL_TOL = 1e-8

CSeq = Union[Callable[[int], float], Sequence[float]]

THEOREMS = ("T3_1", "T3_2", "T3_3", "T3_5_ergodic", "T3_5_strong")
_INSTABILITY = ("T3_5_ergodic", "T3_5_strong")


def k_scan(n_trunc: int) -> int:
    return max(K_SCAN_FACTOR * n_trunc, K_SCAN_FLOOR)


def _c_at(c: CSeq, i: int) -> float:
    if callable(c):
        return float(c(i))
    return float(c[i - 1])


@dataclass
class MeanDriftResult:
    """Sum c_i nu_i over the truncation with a certified-sign tail bound."""

    value: float
    tail_bound: float
    sign: str  # negative | positive | indeterminate

    def to_dict(self) -> dict:
        return {"value": self.value, "tail_bound": self.tail_bound, "sign": self.sign}


def mean_drift_criterion(
    c: CSeq, nu: InvariantMeasure, c_bound: Optional[float] = None
) -> MeanDriftResult:
    """Evaluate sum_i c_i nu_i on the truncation.

    The tail bound charges c_bound against unassigned probability mass plus
    twice the estimated beyond-truncation mass (the boundary state's
    coefficient stands in for the whole tail, hence the factor 2).  The sign
    is certified only when the value clears its own tail bound.
    """
    n = nu.truncation_size
    cs = np.array([_c_at(c, i) for i in range(1, n + 1)])
    if not np.all(np.isfinite(cs)):
        raise ConfigurationError("c_i non-finite on the truncation")
    bound = float(np.max(np.abs(cs))) if c_bound is None else float(c_bound)
    if np.max(np.abs(cs)) > bound * (1 + 1e-12):
        raise ConfigurationError(
            f"max |c_i| = {np.max(np.abs(cs))} exceeds declared bound {bound}"
        )
    value = float(cs @ nu.nu)
    unassigned = max(0.0, 1.0 - nu.sum())
    tail = bound * (unassigned + 2.0 * nu.tail_mass)
    if value + tail < 0.0:
        sign = "negative"
    elif value - tail > 0.0:
        sign = "positive"
    else:
        sign = "indeterminate"
    return MeanDriftResult(value=value, tail_bound=tail, sign=sign)


@dataclass
class MgScan:
    """Grid evidence for M_g = sup |V_x(x) sigma(x, i)| / g(V(x)) < inf."""

    sup_value: float
    finite: bool
    radii: np.ndarray
    values_by_radius: np.ndarray
    regimes_scanned: int

    def to_dict(self) -> dict:
        return {
            "sup_value": self.sup_value,
            "finite": self.finite,
            "radii": [float(r) for r in self.radii],
            "values_by_radius": [float(v) for v in self.values_by_radius],
            "regimes_scanned": self.regimes_scanned,
        }


def scan_mg(
    spec: ModelSpec,
    lyap: LyapunovSpec,
    radii: Optional[Sequence[float]] = None,
    regimes: Optional[Sequence[int]] = None,
) -> MgScan:
    """Scan the martingale-coefficient ratio down to tiny radii.

    finite is declared False when the ratio at the smallest radii exceeds
    MG_GROWTH_FACTOR times its level on the outer half of the scan (or is
    non-finite anywhere): that is the signature of a sup diverging as x -> 0.
    """
    if radii is None:
        radii = np.geomspace(1e-9, lyap.domain_radius, 37)
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[0] <= 0 or radii[-1] > lyap.domain_radius * (1 + 1e-12):
        raise ConfigurationError("scan radii must lie in (0, domain_radius]")
    if regimes is None:
        regimes = range(1, K_SCAN_FLOOR + 1)
    regimes = list(regimes)
    grid_dirs = radial_grid(spec.dim, [1.0], [1])
    dirs = [g[0] for g in grid_dirs]

    values = np.zeros(radii.size)
    for ri, r in enumerate(radii):
        worst = 0.0
        for d in dirs:
            x = r * d
            v = float(lyap.V(x))
            gv = float(lyap.g.g(v))
            grad = (
                np.asarray(lyap.grad_V(x), dtype=float)
                if lyap.grad_V is not None
                else _fd_gradient(lyap.V, x)
            )
            for i in regimes:
                sig = spec.diffusion_at(x, i)
                num = float(np.linalg.norm(grad @ sig))
                ratio = math.inf if gv == 0.0 and num > 0.0 else (num / gv if gv else 0.0)
                if ratio > worst:
                    worst = ratio
        values[ri] = worst

    finite = bool(np.all(np.isfinite(values)))
    if finite and radii.size >= 8:
        inner = float(np.max(values[: max(2, radii.size // 6)]))
        outer = float(np.max(values[radii.size // 2 :]))
        if inner > MG_GROWTH_FACTOR * max(outer, 1e-300):
            finite = False
    return MgScan(
        sup_value=float(np.max(values)),
        finite=finite,
        radii=radii,
        values_by_radius=values,
        regimes_scanned=len(regimes),
    )


@dataclass
class KernelContinuityScan:
    """Grid evidence for sup_i sum_j |q_ij(x) - q_ij(0)| -> 0 as x -> 0."""

    radii: np.ndarray
    s_values: np.ndarray
    vanishing: bool
    regimes_scanned: int

    def to_dict(self) -> dict:
        return {
            "radii": [float(r) for r in self.radii],
            "s_values": [float(v) for v in self.s_values],
            "vanishing": self.vanishing,
            "regimes_scanned": self.regimes_scanned,
        }


def scan_kernel_continuity(
    kernel: RateKernel,
    dim: int,
    radii: Optional[Sequence[float]] = None,
    regimes: Optional[Sequence[int]] = None,
) -> KernelContinuityScan:
    """Evaluate s(r) = max over directions of sup_i sum_j |q_ij(x) - q_ij(0)|.

    vanishing requires the innermost value to fall below an absolute floor or
    below 1% of the largest scanned value.
    """
    if radii is None:
        radii = np.geomspace(1e-6, 0.5, 25)
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[0] <= 0:
        raise ConfigurationError("scan radii must be positive")
    if regimes is None:
        regimes = range(1, K_SCAN_FLOOR + 1)
    regimes = list(regimes)
    dirs = [g[0] for g in radial_grid(dim, [1.0], [1])]
    zero = np.zeros(dim)
    base = {i: dict(kernel.check_row(zero, i)) for i in regimes}

    s = np.zeros(radii.size)
    for ri, r in enumerate(radii):
        worst = 0.0
        for d in dirs:
            x = r * d
            for i in regimes:
                here = dict(kernel.check_row(x, i))
                total = 0.0
                for j in set(here) | set(base[i]):
                    total += abs(here.get(j, 0.0) - base[i].get(j, 0.0))
                if total > worst:
                    worst = total
        s[ri] = worst
    s_max = float(np.max(s))
    vanishing = bool(s[0] <= max(KERNEL_VANISH_ABS, KERNEL_VANISH_REL * s_max))
    return KernelContinuityScan(
        radii=radii, s_values=s, vanishing=vanishing, regimes_scanned=len(regimes)
    )


@dataclass
class CriterionReport:
    """Outcome of one certificate: hypothesis map plus certified verdict."""

    theorem: str
    mean_drift: float
    tail_bound: float
    limsup_tail_c: float
    hypotheses: dict
    verdict: str
    scan_cutoffs: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "hypotheses": dict(self.hypotheses),
            "mean_drift": self.mean_drift,
            "tail_bound": self.tail_bound,
            "limsup_tail_c": self.limsup_tail_c,
            "verdict": self.verdict,
            "scan_cutoffs": dict(self.scan_cutoffs),
            "notes": list(self.notes),
        }


_REQUIRED = {
    # hypothesis -> which evidence object supplies it
    "T3_1": ("ergodicity_diag", "kernel_scan", "drift_report"),
    "T3_2": ("drift_report", "mg_scan"),
    "T3_3": ("ergodicity_diag", "kernel_scan", "drift_report", "mg_scan"),
    "T3_5_ergodic": ("drift_report", "mg_scan"),
    "T3_5_strong": ("ergodicity_diag", "kernel_scan", "drift_report", "mg_scan"),
}


def check_theorem_hypotheses(
    which: str,
    lyap: LyapunovSpec,
    nu: InvariantMeasure,
    drift_report=None,
    mg_scan: Optional[MgScan] = None,
    kernel_scan: Optional[KernelContinuityScan] = None,
    ergodicity: Optional[ErgodicityDiagnostic] = None,
) -> CriterionReport:
    """Assemble the certificate for one criterion from scan evidence.

    Stability criteria need the forward drift scan; the instability criteria
    need the reversed one, a positive averaged drift, and (for the ergodic
    variant) a positive tail of c_i.  A missing required input raises a
    configuration error naming the gap.
    """
    if which not in THEOREMS:
        raise ConfigurationError(f"unknown criterion {which!r}; choose from {THEOREMS}")
    provided = {
        "ergodicity_diag": ergodicity,
        "kernel_scan": kernel_scan,
        "drift_report": drift_report,
        "mg_scan": mg_scan,
    }
    missing = [name for name in _REQUIRED[which] if provided[name] is None]
    if missing:
        raise ConfigurationError(
            f"{which} needs inputs that were not supplied: {', '.join(missing)}"
        )
    instability = which in _INSTABILITY
    if drift_report.reversed_inequality != instability:
        want = "reversed" if instability else "forward"
        raise ConfigurationError(
            f"{which} needs the {want} drift-condition scan; "
            f"got reversed_inequality={drift_report.reversed_inequality}"
        )

    K = k_scan(nu.truncation_size)
    k0 = K // 2
    tail_cs = np.array([_c_at(lyap.c, i) for i in range(k0 + 1, K + 1)])
    all_cs = np.array([_c_at(lyap.c, i) for i in range(1, K + 1)])
    limsup_tail = float(np.max(tail_cs))
    liminf_tail = float(np.min(tail_cs))
    md = mean_drift_criterion(lyap.c, nu, c_bound=lyap.c_bound)

    notes = []
    hyp: dict = {}

    def mark(name: str, ok: Optional[bool]) -> None:
        hyp[name] = "unchecked" if ok is None else ("holds" if ok else "fails")

    strong_ok = None
    if ergodicity is not None:
        strong_ok = ergodicity.verdict in ("strongly_exponentially_ergodic", "mixed")
        if ergodicity.verdict == "mixed":
            notes.append("distance to nu hit the numerical floor: treated as strong ergodicity evidence")
    ergodic_ok = nu.residual <= ERGODIC_RESIDUAL_TOL

    if which == "T3_1":
        mark("strong_ergodicity", strong_ok)
        mark("kernel_continuity", kernel_scan.vanishing)
        mark("g_is_identity", lyap.g.kind == "identity")
        mark("drift_condition", drift_report.ok)
        mark("c_bounded", bool(np.max(np.abs(all_cs)) <= lyap.c_bound * (1 + 1e-12)))
        mark("mean_drift_negative", md.sign == "negative")
    elif which == "T3_2":
        mark("ergodicity", ergodic_ok if strong_ok is None else (ergodic_ok or strong_ok))
        mark("drift_condition", drift_report.ok)
        mark("c_bounded", bool(np.max(np.abs(all_cs)) <= lyap.c_bound * (1 + 1e-12)))
        mark("limsup_tail_c_negative", limsup_tail < 0.0)
        mark("mg_finite", mg_scan.finite)
        mark("mean_drift_negative", md.sign == "negative")
        if kernel_scan is not None:
            mark("kernel_continuity", kernel_scan.vanishing)
    elif which == "T3_3":
        mark("strong_ergodicity", strong_ok)
        mark("kernel_continuity", kernel_scan.vanishing)
        mark("drift_condition", drift_report.ok)
        mark("c_bounded", bool(np.max(np.abs(all_cs)) <= lyap.c_bound * (1 + 1e-12)))
        mark("mg_finite", mg_scan.finite)
        mark("mean_drift_negative", md.sign == "negative")
    elif which == "T3_5_ergodic":
        mark("ergodicity", ergodic_ok if strong_ok is None else (ergodic_ok or strong_ok))
        mark("reversed_drift_condition", drift_report.ok)
        mark("c_bounded", bool(np.max(np.abs(all_cs)) <= lyap.c_bound * (1 + 1e-12)))
        mark("liminf_tail_c_positive", liminf_tail > 0.0)
        mark("mg_finite", mg_scan.finite)
        mark("mean_drift_positive", md.sign == "positive")
    else:  # T3_5_strong
        mark("strong_ergodicity", strong_ok)
        mark("kernel_continuity", kernel_scan.vanishing)
        mark("reversed_drift_condition", drift_report.ok)
        mark("c_bounded", bool(np.max(np.abs(all_cs)) <= lyap.c_bound * (1 + 1e-12)))
        mark("mg_finite", mg_scan.finite)
        mark("mean_drift_positive", md.sign == "positive")

    all_hold = all(v == "holds" for v in hyp.values())
    if all_hold:
        verdict = "unstable_certified" if instability else "stable_certified"
    else:
        verdict = "inconclusive"
    notes.append("numeric scans are grid evidence, not proof")
    return CriterionReport(
        theorem=which,
        mean_drift=md.value,
        tail_bound=md.tail_bound,
        limsup_tail_c=limsup_tail,
        hypotheses=hyp,
        verdict=verdict,
        scan_cutoffs={
            "K_scan": K,
            "tail_window_start": k0 + 1,
            "truncation_size": nu.truncation_size,
            "drift_grid_points": getattr(drift_report, "n_checked", 0),
        },
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Linearization at the origin


@dataclass
class LinearizationData:
    """Per-regime linear parts at 0 and their eigenvalue summaries.

    Lam1[i] / lam1[i]: extreme eigenvalues of the symmetric part of b(i);
    Lam2[i][k] / lam2[i][k]: extreme eigenvalues of sigma_k(i) sigma_k(i)^T.
    residuals[r] tracks sup_i (|xi_i(x)| v |zeta_i(x)|) / |x| at probe radii.
    """

    regimes: list
    b_matrices: dict
    sigma_matrices: dict
    Lam1: dict
    lam1: dict
    Lam2: dict
    lam2: dict
    probe_radii: list
    residuals: list
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "regimes": list(self.regimes),
            "Lam1": {i: self.Lam1[i] for i in self.regimes},
            "lam1": {i: self.lam1[i] for i in self.regimes},
            "Lam2": {i: list(self.Lam2[i]) for i in self.regimes},
            "lam2": {i: list(self.lam2[i]) for i in self.regimes},
            "probe_radii": list(self.probe_radii),
            "residuals": list(self.residuals),
            "warning": self.warning,
        }


def _fd_jacobian(f: Callable[[np.ndarray], np.ndarray], n: int, step: float = 1e-6) -> np.ndarray:
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        J[:, k] = (np.asarray(f(e), dtype=float) - np.asarray(f(-e), dtype=float)) / (
            2.0 * step
        )
    return J


def linearize(
    spec: ModelSpec,
    regimes: Sequence[int],
    probe_radii: Sequence[float] = (1e-1, 1e-2, 1e-3),
) -> LinearizationData:
    """Extract b(i), sigma_k(i) at the origin and check linearizability.

    Exact matrices are taken from spec.linearization when present; otherwise
    central differences at 0.  The residual ratio sup_i (|b(x,i) - b(i)x| v
    |sigma(x,i) - (sigma_1(i)x ... )|)/|x| must decrease along the probe
    radii; if not, a warning is attached and the linearized criteria should
    not be trusted.
    """
    if not spec.zero_fixed:
        raise ConfigurationError("linearization requires the origin to be an equilibrium")
    regimes = list(regimes)
    if not regimes:
        raise ConfigurationError("need at least one regime to linearize")
    n, d = spec.dim, spec.noise_dim
    b_mats: dict = {}
    s_mats: dict = {}
    for i in regimes:
        if spec.linearization is not None:
            b_mats[i] = np.asarray(spec.linearization.drift_matrix(i), dtype=float)
            if spec.linearization.diffusion_matrices is not None:
                s_mats[i] = [
                    np.asarray(m, dtype=float)
                    for m in spec.linearization.diffusion_matrices(i)
                ]
            else:
                s_mats[i] = [np.zeros((n, n)) for _ in range(d)]
        else:
            b_mats[i] = _fd_jacobian(lambda y, ii=i: spec.drift_at(y, ii), n)
            cols = []
            for k in range(d):
                cols.append(
                    _fd_jacobian(lambda y, ii=i, kk=k: spec.diffusion_at(y, ii)[:, kk], n)
                )
            s_mats[i] = cols
        if b_mats[i].shape != (n, n):
            raise ConfigurationError(f"drift matrix for regime {i} has shape {b_mats[i].shape}")
        if len(s_mats[i]) != d:
            raise ConfigurationError(f"need {d} diffusion matrices for regime {i}")

    Lam1, lam1, Lam2, lam2 = {}, {}, {}, {}
    for i in regimes:
        sym = 0.5 * (b_mats[i] + b_mats[i].T)
        eigs = np.linalg.eigvalsh(sym)
        Lam1[i], lam1[i] = float(eigs[-1]), float(eigs[0])
        Lam2[i] = []
        lam2[i] = []
        for m in s_mats[i]:
            gram_eigs = np.linalg.eigvalsh(m @ m.T)
            Lam2[i].append(float(gram_eigs[-1]))
            lam2[i].append(max(0.0, float(gram_eigs[0])))

    probe_radii = sorted(probe_radii, reverse=True)
    dirs = [g[0] for g in radial_grid(n, [1.0], [1])]
    residuals = []
    for r in probe_radii:
        worst = 0.0
        for dvec in dirs:
            x = r * dvec
            for i in regimes:
                xi = spec.drift_at(x, i) - b_mats[i] @ x
                lin_sigma = np.column_stack([m @ x for m in s_mats[i]])
                zeta = spec.diffusion_at(x, i) - lin_sigma
                ratio = max(
                    float(np.linalg.norm(xi)), float(np.linalg.norm(zeta))
                ) / r
                if ratio > worst:
                    worst = ratio
        residuals.append(worst)
    warning = None
    tolerance = 1e-12 + 1e-9 * max(residuals, default=0.0)
    decreasing = all(
        residuals[k + 1] <= residuals[k] + tolerance for k in range(len(residuals) - 1)
    )
    if not decreasing:
        warning = (
            "residual ratio does not decrease toward 0 along the probe radii; "
            "the coefficients may not be linearizable at the origin"
        )
    return LinearizationData(
        regimes=regimes,
        b_matrices=b_mats,
        sigma_matrices=s_mats,
        Lam1=Lam1,
        lam1=lam1,
        Lam2=Lam2,
        lam2=lam2,
        probe_radii=list(probe_radii),
        residuals=residuals,
        warning=warning,
    )


EIGEN_CONVENTION_NOTE = (
    "criterion uses extreme eigenvalues of the symmetric part (b(i)+b(i)^T)/2 "
    "and of sigma_k(i) sigma_k(i)^T, not eigenvalues of b(i) itself; for "
    "non-normal b(i) these differ"
)


@dataclass
class LinearCriterionReport:
    stable_value: float
    unstable_value: float
    tail_bound: float
    verdict: str
    note: str = EIGEN_CONVENTION_NOTE

    def to_dict(self) -> dict:
        return {
            "stable_value": self.stable_value,
            "unstable_value": self.unstable_value,
            "tail_bound": self.tail_bound,
            "verdict": self.verdict,
            "note": self.note,
        }


def proposition41_criterion(
    data: LinearizationData, nu: InvariantMeasure
) -> LinearCriterionReport:
    """Averaged linearized criterion.

    stable_value = sum nu_i (Lam1_i + 1/2 sum_k Lam2_ik) certifies stability
    when it clears the truncation tail bound below zero; unstable_value uses
    the minimum eigenvalues and certifies instability above zero.  The two
    leave a gap in which the verdict stays inconclusive.
    """
    needed = range(1, nu.truncation_size + 1)
    missing = [i for i in needed if i not in data.Lam1]
    if missing:
        raise ConfigurationError(
            f"linearization lacks regimes {missing[:5]} needed by the measure truncation"
        )
    up = np.array([data.Lam1[i] + 0.5 * sum(data.Lam2[i]) for i in needed])
    lo = np.array([data.lam1[i] + 0.5 * sum(data.lam2[i]) for i in needed])
    stable_value = float(up @ nu.nu)
    unstable_value = float(lo @ nu.nu)
    bound = float(max(np.max(np.abs(up)), np.max(np.abs(lo))))
    unassigned = max(0.0, 1.0 - nu.sum())
    tail = bound * (unassigned + 2.0 * nu.tail_mass)
    if stable_value + tail < 0.0:
        verdict = "stable_certified"
    elif unstable_value - tail > 0.0:
        verdict = "unstable_certified"
    else:
        verdict = "inconclusive"
    return LinearCriterionReport(
        stable_value=stable_value,
        unstable_value=unstable_value,
        tail_bound=tail,
        verdict=verdict,
    )
