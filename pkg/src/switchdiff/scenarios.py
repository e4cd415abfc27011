"""Scenario files: named coefficient families wired into runnable bundles.

A scenario is a JSON document selecting a model family (example51, example52,
linear), a switching-kernel family (birth_death, example52_q, two_state,
custom_table), a Lyapunov family (square, power_p) with a rate profile g and
a c-sequence, plus chain truncation, simulation, and Monte Carlo settings.
Numeric parameters live in the file so runs are reproducible; the bundle
carries a sha256 of the canonical document for provenance.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .model import ExactLinearization, LyapunovSpec, ModelSpec, RateKernel
from .rates import RateProfile, identity_profile, power_profile
from .simulator import SimConfig

MODEL_FAMILIES = ("example51", "example52", "linear")
KERNEL_FAMILIES = ("birth_death", "example52_q", "two_state", "custom_table")
LYAPUNOV_FAMILIES = ("square", "power_p")
G_KINDS = ("identity", "power_1_plus_gamma")
C_KINDS = ("constant", "table", "expr")

# names available to c expressions, besides per-regime values and parameters
_EXPR_MATH = {
    "abs": abs,
    "min": min,
    "max": max,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
}


def _norm(x) -> float:
    if isinstance(x, (float, int)):
        return abs(float(x))
    return float(np.linalg.norm(x))


def _pick(values, i: int) -> float:
    """Regime lookup with a saturating tail: values[-1] covers i beyond it."""
    return float(values[min(i, len(values)) - 1])


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigurationError(f"{where}: missing required key {key!r}")
    return mapping[key]


# ---------------------------------------------------------------------------
# Kernel families


def build_kernel(family: str, params: dict) -> RateKernel:
    if family == "birth_death":
        up = float(params.get("up", 1.0))
        down = float(params.get("down", 2.0))
        mod = float(params.get("modulation", 0.0))
        if up < 0 or down <= 0 or mod < 0:
            raise ConfigurationError(
                "kernel.params: need up >= 0, down > 0, modulation >= 0"
            )

        if mod == 0.0:
            def row(x, i):
                if i == 1:
                    return ((2, up),)
                return ((i - 1, down), (i + 1, up))

            return RateKernel(
                row=row, global_bound=up + down, x_independent=True
            )

        def row(x, i):
            f = 1.0 + mod * math.sin(_norm(x)) ** 2
            if i == 1:
                return ((2, up * f),)
            return ((i - 1, down * f), (i + 1, up * f))

        return RateKernel(
            row=row,
            global_bound=(up + down) * (1.0 + mod),
            x_independent=False,
        )

    if family == "example52_q":
        scale = float(params.get("scale", 1.0))
        if scale <= 0:
            raise ConfigurationError("kernel.params.scale must be positive")

        def row(x, i):
            r = scale * (1.0 + math.sin(_norm(x)))
            if i == 1:
                return ((2, r),)
            return ((1, r), (i + 1, r))

        return RateKernel(row=row, global_bound=4.0 * scale, x_independent=False)

    if family == "two_state":
        q12 = float(_require(params, "q12", "kernel.params"))
        q21 = float(_require(params, "q21", "kernel.params"))
        if q12 < 0 or q21 < 0:
            raise ConfigurationError("kernel.params: rates must be nonnegative")

        def row(x, i):
            if i == 1:
                return ((2, q12),)
            if i == 2:
                return ((1, q21),)
            return ()

        return RateKernel(row=row, global_bound=max(q12, q21), x_independent=True)

    if family == "custom_table":
        raw = _require(params, "rows", "kernel.params")
        table = {}
        for key, entries in raw.items():
            i = int(key)
            parsed = tuple(sorted((int(j), float(r)) for j, r in entries))
            for j, r in parsed:
                if r < 0:
                    raise ConfigurationError(
                        f"kernel.params.rows[{key}]: negative rate {r}"
                    )
                if j == i or j < 1:
                    raise ConfigurationError(
                        f"kernel.params.rows[{key}]: invalid target {j}"
                    )
            table[i] = parsed
        declared = params.get("global_bound", "auto")
        if declared == "auto":
            bound = max(
                (sum(r for _, r in row_) for row_ in table.values()), default=0.0
            )
        else:
            bound = None if declared is None else float(declared)

        def row(x, i):
            return table.get(i, ())

        return RateKernel(row=row, global_bound=bound, x_independent=True)

    raise ConfigurationError(
        f"unknown kernel family {family!r}; choose from {KERNEL_FAMILIES}"
    )


# ---------------------------------------------------------------------------
# Model families


def build_model(model_cfg: dict, kernel: RateKernel) -> ModelSpec:
    family = _require(model_cfg, "family", "model")
    params = model_cfg.get("params", {})

    if family == "example51":
        b = [float(v) for v in _require(params, "b", "model.params")]
        sigma = [float(v) for v in _require(params, "sigma", "model.params")]
        gamma = float(_require(params, "gamma", "model.params"))
        if not (0.0 < gamma < 1.0):
            raise ConfigurationError(f"model.params.gamma must be in (0,1), got {gamma}")
        if not b or not sigma:
            raise ConfigurationError("model.params: b and sigma must be nonempty")
        two_gamma = 2.0 * gamma

        def scalar_drift(x: float, i: int) -> float:
            return _pick(b, i) * x * abs(x) ** two_gamma

        def scalar_diffusion(x: float, i: int) -> float:
            s = math.sin(x)
            return _pick(sigma, i) * s * s

        def drift(x, i):
            return np.array([scalar_drift(float(x[0]), i)])

        def diffusion(x, i):
            return np.array([[scalar_diffusion(float(x[0]), i)]])

        return ModelSpec(
            dim=1,
            noise_dim=1,
            drift=drift,
            diffusion=diffusion,
            rate_kernel=kernel,
            zero_fixed=True,
            scalar_drift=scalar_drift,
            scalar_diffusion=scalar_diffusion,
        )

    if family in ("example52", "linear"):
        mats = [
            np.asarray(m, dtype=float) for m in _require(params, "matrices", "model.params")
        ]
        if not mats:
            raise ConfigurationError("model.params.matrices must be nonempty")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise ConfigurationError(
                    f"model.params.matrices must all be {n}x{n}, got {m.shape}"
                )
        sig_raw = params.get("sigma_matrices")
        noise_dim = int(params.get("noise_dim", 1))
        sig_mats = None
        if sig_raw is not None:
            sig_mats = [
                [np.asarray(s, dtype=float) for s in regime] for regime in sig_raw
            ]
            noise_dim = len(sig_mats[0])
            for regime in sig_mats:
                if len(regime) != noise_dim or any(s.shape != (n, n) for s in regime):
                    raise ConfigurationError(
                        "model.params.sigma_matrices must be per-regime lists "
                        f"of {noise_dim} {n}x{n} matrices"
                    )

        def A(i: int) -> np.ndarray:
            return mats[min(i, len(mats)) - 1]

        def S(i: int):
            if sig_mats is None:
                return [np.zeros((n, n)) for _ in range(noise_dim)]
            return sig_mats[min(i, len(sig_mats)) - 1]

        def drift(x, i):
            return A(i) @ x

        def diffusion(x, i):
            return np.column_stack([m @ x for m in S(i)])

        scalar_drift = None
        scalar_diffusion = None
        if n == 1 and noise_dim == 1:
            def scalar_drift(x: float, i: int) -> float:
                return float(A(i)[0, 0]) * x

            def scalar_diffusion(x: float, i: int) -> float:
                return float(S(i)[0][0, 0]) * x

        return ModelSpec(
            dim=n,
            noise_dim=noise_dim,
            drift=drift,
            diffusion=diffusion,
            rate_kernel=kernel,
            zero_fixed=True,
            scalar_drift=scalar_drift,
            scalar_diffusion=scalar_diffusion,
            linearization=ExactLinearization(drift_matrix=A, diffusion_matrices=S),
        )

    raise ConfigurationError(
        f"unknown model family {family!r}; choose from {MODEL_FAMILIES}"
    )


# ---------------------------------------------------------------------------
# Lyapunov families, rate profiles, c sequences


def _regime_env(model_cfg: dict) -> Callable[[int], dict]:
    """Per-regime names available to c expressions (b, sigma, Lam1, lam1)."""
    family = model_cfg.get("family")
    params = model_cfg.get("params", {})
    if family == "example51":
        b = [float(v) for v in params.get("b", [])]
        sigma = [float(v) for v in params.get("sigma", [])]

        def env(i: int) -> dict:
            return {"b": _pick(b, i), "sigma": _pick(sigma, i)}

        return env
    if family in ("example52", "linear"):
        mats = [np.asarray(m, dtype=float) for m in params.get("matrices", [])]
        lam_pairs = []
        for m in mats:
            eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
            lam_pairs.append((float(eigs[0]), float(eigs[-1])))

        def env(i: int) -> dict:
            lo, hi = lam_pairs[min(i, len(lam_pairs)) - 1]
            return {"lam1": lo, "Lam1": hi}

        return env

    def env(i: int) -> dict:
        return {}

    return env


def build_c(c_cfg: dict, model_cfg: dict):
    """Return (c callable, c_bound) from a c-sequence declaration."""
    kind = _require(c_cfg, "kind", "lyapunov.c")
    if kind == "constant":
        value = float(_require(c_cfg, "value", "lyapunov.c"))
        bound = float(c_cfg.get("bound", abs(value)))
        return (lambda i: value), bound
    if kind == "table":
        values = [float(v) for v in _require(c_cfg, "values", "lyapunov.c")]
        tail = float(c_cfg.get("tail", values[-1]))
        bound = float(
            c_cfg.get("bound", max([abs(tail)] + [abs(v) for v in values]))
        )

        def c(i: int) -> float:
            return values[i - 1] if i <= len(values) else tail

        return c, bound
    if kind == "expr":
        text = _require(c_cfg, "expr", "lyapunov.c")
        bound = float(_require(c_cfg, "bound", "lyapunov.c"))
        params = {k: float(v) for k, v in c_cfg.get("params", {}).items()}
        code = compile(str(text), "<c-expr>", "eval")
        env_of = _regime_env(model_cfg)
        cache: dict = {}

        def c(i: int) -> float:
            if i in cache:
                return cache[i]
            names = dict(_EXPR_MATH)
            names.update(params)
            names.update(env_of(i))
            names["i"] = i
            try:
                val = float(eval(code, {"__builtins__": {}}, names))
            except NameError as exc:
                raise ConfigurationError(f"lyapunov.c expr uses unknown name: {exc}")
            cache[i] = val
            return val

        return c, bound
    raise ConfigurationError(f"unknown c kind {kind!r}; choose from {C_KINDS}")


def build_profile(g_cfg: dict, default_h: float) -> RateProfile:
    kind = _require(g_cfg, "kind", "lyapunov.g")
    h = float(g_cfg.get("h", default_h))
    if kind == "identity":
        return identity_profile(h=h)
    if kind == "power_1_plus_gamma":
        gamma = float(_require(g_cfg, "gamma", "lyapunov.g"))
        return power_profile(gamma=gamma, h=h)
    raise ConfigurationError(f"unknown g kind {kind!r}; choose from {G_KINDS}")


def build_lyapunov(lyap_cfg: dict, model_cfg: dict, dim: int) -> LyapunovSpec:
    family = _require(lyap_cfg, "family", "lyapunov")
    radius = float(_require(lyap_cfg, "domain_radius", "lyapunov"))
    if radius <= 0:
        raise ConfigurationError("lyapunov.domain_radius must be positive")

    if family == "square":
        V = lambda x: float(np.dot(x, x))
        grad = lambda x: 2.0 * np.asarray(x, dtype=float)
        hess = lambda x: 2.0 * np.eye(dim)
        v_at_radius = radius**2
    elif family == "power_p":
        p = float(_require(lyap_cfg, "p", "lyapunov"))
        if p <= 0:
            raise ConfigurationError("lyapunov.p must be positive")

        def V(x):
            return float(np.linalg.norm(x) ** p)

        def grad(x):
            x = np.asarray(x, dtype=float)
            r = float(np.linalg.norm(x))
            return p * r ** (p - 2.0) * x

        def hess(x):
            x = np.asarray(x, dtype=float)
            r = float(np.linalg.norm(x))
            eye = np.eye(dim)
            return p * r ** (p - 2.0) * eye + p * (p - 2.0) * r ** (p - 4.0) * np.outer(
                x, x
            )

        v_at_radius = radius**p
    else:
        raise ConfigurationError(
            f"unknown lyapunov family {family!r}; choose from {LYAPUNOV_FAMILIES}"
        )

    profile = build_profile(_require(lyap_cfg, "g", "lyapunov"), default_h=v_at_radius)
    c, bound = build_c(_require(lyap_cfg, "c", "lyapunov"), model_cfg)
    return LyapunovSpec(
        V=V,
        g=profile,
        c=c,
        c_bound=bound,
        domain_radius=radius,
        grad_V=grad,
        hess_V=hess,
    )


# ---------------------------------------------------------------------------
# Bundles


@dataclass
class McSettings:
    n_paths: int = 1000
    epsilon: float = 0.25
    delta_sweep: list = field(default_factory=lambda: [0.05, 0.03, 0.02])
    rate_paths: int = 300
    rate_horizon: Optional[float] = None
    rate_T0: Optional[float] = None


@dataclass
class ScenarioBundle:
    name: str
    model: ModelSpec
    lyap: LyapunovSpec
    chain_N: int
    chain_mode: str
    sim: SimConfig
    x0: np.ndarray
    i0: int
    mc: McSettings
    outputs: str
    raw: dict
    sha256: str


def scenario_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_scenario(doc: dict, sha: Optional[str] = None) -> ScenarioBundle:
    """Build a runnable bundle from a scenario document.

    sha, when given, pins the provenance hash to the source file's raw bytes;
    otherwise the canonical JSON encoding of doc is hashed.
    """
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario document must be a JSON object")
    name = str(doc.get("name", "unnamed"))
    model_cfg = _require(doc, "model", "scenario")
    kernel_cfg = _require(doc, "kernel", "scenario")
    lyap_cfg = _require(doc, "lyapunov", "scenario")
    chain_cfg = doc.get("chain", {})
    sim_cfg = dict(doc.get("sim", {}))
    mc_cfg = doc.get("mc", {})

    kernel = build_kernel(
        _require(kernel_cfg, "family", "kernel"), kernel_cfg.get("params", {})
    )
    model = build_model(model_cfg, kernel)
    lyap = build_lyapunov(lyap_cfg, model_cfg, dim=model.dim)

    N = int(chain_cfg.get("N", 30))
    mode = str(chain_cfg.get("mode", "lump"))
    if N < 1:
        raise ConfigurationError("chain.N must be >= 1")
    if mode not in ("lump", "drop"):
        raise ConfigurationError(f"chain.mode must be lump or drop, got {mode!r}")

    x0 = np.asarray(sim_cfg.pop("x0", [0.0] * model.dim), dtype=float).reshape(-1)
    if x0.shape != (model.dim,):
        raise ConfigurationError(f"sim.x0 has shape {x0.shape}, want ({model.dim},)")
    i0 = int(sim_cfg.pop("i0", 1))
    if i0 < 1:
        raise ConfigurationError("sim.i0 must be a positive regime index")
    sim = SimConfig(
        dt=float(sim_cfg.get("dt", 1e-3)),
        horizon=float(sim_cfg.get("horizon", 10.0)),
        seed=int(sim_cfg.get("seed", 0)),
        path_index=int(sim_cfg.get("path_index", 0)),
        switch_scheme=str(sim_cfg.get("switch_scheme", "per_step_thinning")),
        stop_radius=(
            None
            if sim_cfg.get("stop_radius") is None
            else float(sim_cfg["stop_radius"])
        ),
        record_stride=int(sim_cfg.get("record_stride", 1)),
    )
    mc = McSettings(
        n_paths=int(mc_cfg.get("n_paths", 1000)),
        epsilon=float(mc_cfg.get("epsilon", 0.25)),
        delta_sweep=[float(v) for v in mc_cfg.get("delta_sweep", [0.05, 0.03, 0.02])],
        rate_paths=int(mc_cfg.get("rate_paths", 300)),
        rate_horizon=(
            None
            if mc_cfg.get("rate_horizon") is None
            else float(mc_cfg["rate_horizon"])
        ),
        rate_T0=(None if mc_cfg.get("rate_T0") is None else float(mc_cfg["rate_T0"])),
    )
    if not (0.0 < mc.epsilon < 1.0):
        raise ConfigurationError("mc.epsilon must be in (0, 1)")
    if mc.n_paths < 1 or mc.rate_paths < 1:
        raise ConfigurationError("mc path counts must be >= 1")
    return ScenarioBundle(
        name=name,
        model=model,
        lyap=lyap,
        chain_N=N,
        chain_mode=mode,
        sim=sim,
        x0=x0,
        i0=i0,
        mc=mc,
        outputs=str(doc.get("outputs", os.path.join("out", name))),
        raw=doc,
        sha256=sha if sha is not None else scenario_hash(doc),
    )


def load_scenario(path: str) -> ScenarioBundle:
    """Parse a scenario file; the bundle hash is the sha256 of the file bytes,
    so any edit to the file (even whitespace) yields a new hash."""
    try:
        with open(path, "rb") as fh:
            raw_bytes = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc}")
    try:
        doc = json.loads(raw_bytes.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        detail = (
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            if isinstance(exc, json.JSONDecodeError)
            else f"not UTF-8: {exc}"
        )
        raise ConfigurationError(f"{path}: {detail}")
    return parse_scenario(doc, sha=hashlib.sha256(raw_bytes).hexdigest())


# ---------------------------------------------------------------------------
# Bundled presets


PRESETS: dict = {
    "example51_stable": {
        "name": "example51_stable",
        "model": {
            "family": "example51",
            "params": {"b": [1.0, -2.0], "sigma": [0.3, 0.4], "gamma": 0.5},
        },
        "kernel": {
            "family": "birth_death",
            "params": {"up": 10.0, "down": 20.0, "modulation": 0.0},
        },
        "lyapunov": {
            "family": "square",
            "domain_radius": 0.5,
            "g": {"kind": "power_1_plus_gamma", "gamma": 0.5},
            "c": {
                "kind": "expr",
                "expr": "2*b + eps",
                "params": {"eps": 0.2},
                "bound": 4.2,
            },
        },
        "chain": {"N": 40, "mode": "lump"},
        "sim": {
            "dt": 0.002,
            "horizon": 15.0,
            "stop_radius": 0.5,
            "record_stride": 10,
            "x0": [0.02],
            "i0": 1,
            "seed": 20260816,
        },
        "mc": {
            "n_paths": 10000,
            "epsilon": 0.25,
            "delta_sweep": [0.05, 0.03, 0.02],
            "rate_paths": 300,
            "rate_horizon": 100.0,
            "rate_T0": 10.0,
        },
        "outputs": "out/example51_stable",
    },
    "example51_unstable": {
        "name": "example51_unstable",
        "model": {
            "family": "example51",
            "params": {"b": [1.0, 2.0], "sigma": [0.3, 0.4], "gamma": 0.5},
        },
        "kernel": {
            "family": "birth_death",
            "params": {"up": 10.0, "down": 20.0, "modulation": 0.0},
        },
        "lyapunov": {
            "family": "square",
            "domain_radius": 0.5,
            "g": {"kind": "power_1_plus_gamma", "gamma": 0.5},
            "c": {"kind": "expr", "expr": "2*b", "params": {}, "bound": 4.0},
        },
        "chain": {"N": 40, "mode": "lump"},
        "sim": {
            "dt": 0.002,
            "horizon": 40.0,
            "stop_radius": 0.5,
            "record_stride": 10,
            "x0": [0.02],
            "i0": 1,
            "seed": 20260816,
        },
        "mc": {"n_paths": 10000, "epsilon": 0.25, "delta_sweep": [0.05, 0.03, 0.02]},
        "outputs": "out/example51_unstable",
    },
    "example52_stable": {
        "name": "example52_stable",
        "model": {
            "family": "example52",
            "params": {"matrices": [[[-6.0, 1.0], [0.0, -6.0]], [[1.0, 0.5], [0.0, 1.0]]]},
        },
        "kernel": {"family": "example52_q", "params": {"scale": 1.0}},
        "lyapunov": {
            "family": "square",
            "domain_radius": 0.5,
            "g": {"kind": "identity"},
            "c": {"kind": "expr", "expr": "2*Lam1", "params": {}, "bound": 11.5},
        },
        "chain": {"N": 30, "mode": "lump"},
        "sim": {
            "dt": 0.002,
            "horizon": 10.0,
            "stop_radius": 0.5,
            "record_stride": 5,
            "x0": [0.001, 0.0],
            "i0": 1,
            "seed": 20260816,
        },
        "mc": {"n_paths": 10000, "epsilon": 0.25, "delta_sweep": [0.01, 0.005, 0.001]},
        "outputs": "out/example52_stable",
    },
    "example52_unstable": {
        "name": "example52_unstable",
        "model": {
            "family": "example52",
            "params": {"matrices": [[[4.0, 0.5], [0.0, 4.0]], [[-1.0, 0.25], [0.0, -1.0]]]},
        },
        "kernel": {"family": "example52_q", "params": {"scale": 1.0}},
        "lyapunov": {
            "family": "square",
            "domain_radius": 0.5,
            "g": {"kind": "identity"},
            "c": {"kind": "expr", "expr": "2*lam1", "params": {}, "bound": 8.0},
        },
        "chain": {"N": 30, "mode": "lump"},
        "sim": {
            "dt": 0.002,
            "horizon": 10.0,
            "stop_radius": 0.5,
            "record_stride": 5,
            "x0": [0.001, 0.0],
            "i0": 1,
            "seed": 20260816,
        },
        "mc": {"n_paths": 10000, "epsilon": 0.25, "delta_sweep": [0.01, 0.005, 0.001]},
        "outputs": "out/example52_unstable",
    },
    "contraction_benchmark": {
        "name": "contraction_benchmark",
        "model": {"family": "linear", "params": {"matrices": [[[-1.0]]]}},
        "kernel": {"family": "custom_table", "params": {"rows": {}, "global_bound": 1.0}},
        "lyapunov": {
            "family": "square",
            "domain_radius": 1.0,
            "g": {"kind": "identity"},
            "c": {"kind": "constant", "value": -2.0, "bound": 2.0},
        },
        "chain": {"N": 1, "mode": "drop"},
        "sim": {
            "dt": 0.001,
            "horizon": 10.0,
            "stop_radius": None,
            "record_stride": 10,
            "x0": [1.0],
            "i0": 1,
            "seed": 7,
        },
        "mc": {"n_paths": 8, "epsilon": 0.25, "rate_paths": 8, "rate_horizon": 10.0},
        "outputs": "out/contraction_benchmark",
    },
    "two_state_switching": {
        "name": "two_state_switching",
        "model": {"family": "linear", "params": {"matrices": [[[0.0]]]}},
        "kernel": {"family": "two_state", "params": {"q12": 1.0, "q21": 2.0}},
        "lyapunov": {
            "family": "square",
            "domain_radius": 1.0,
            "g": {"kind": "identity"},
            "c": {"kind": "constant", "value": 0.0, "bound": 0.0},
        },
        "chain": {"N": 2, "mode": "drop"},
        "sim": {
            "dt": 0.001,
            "horizon": 10000.0,
            "stop_radius": None,
            "record_stride": 100000,
            "x0": [0.1],
            "i0": 1,
            "seed": 11,
        },
        "mc": {"n_paths": 1, "epsilon": 0.25},
        "outputs": "out/two_state_switching",
    },
}


def preset(name: str) -> ScenarioBundle:
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return parse_scenario(json.loads(json.dumps(PRESETS[name])))


def write_preset_files(directory: str) -> list:
    """Dump every bundled preset as a JSON scenario file; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, doc in sorted(PRESETS.items()):
        path = os.path.join(directory, f"{name}.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
    return paths
