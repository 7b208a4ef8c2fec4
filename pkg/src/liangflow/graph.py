"""All-pairs causal analysis, significance filtering, and serialization.

``all_pairs`` evaluates every directed rate in one pass — the matrix
orientation is T[target][source] ("flow into row"), stamped into every
serialized output — and ``build_graph`` keeps the relations that survive
the significance test. DOT and JSON emitters are byte-deterministic so
outputs can be diffed and cached.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import estimator as _est
from .core import TimeSeriesSet, forward_difference
from .errors import MalformedError, NumericalError, ValidationError

_MODES = ("multivariate", "bivariate")


@dataclass(frozen=True, eq=False)
class FlowMatrix:
    """All directed rates for one dataset, T[target][source] orientation.

    Diagonals hold the self rates. P/SE are the matching p-values and
    standard errors; TAU and noise_share hold the normalized shares (all
    NaN when normalization was off). Equality is exact and field-wise,
    treating NaNs in the same slot as equal.
    """

    names: tuple
    dt: float
    k: int
    alpha: float
    mode: str
    T: np.ndarray
    P: np.ndarray
    TAU: np.ndarray
    SE: np.ndarray
    noise_share: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        for name in ("T", "P", "TAU", "SE", "noise_share"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def d(self) -> int:
        return self.T.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FlowMatrix):
            return NotImplemented
        scalars = (
            self.names == other.names
            and self.dt == other.dt
            and self.k == other.k
            and self.alpha == other.alpha
            and self.mode == other.mode
        )
        return scalars and all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
            for f in ("T", "P", "TAU", "SE", "noise_share")
        )


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    value: float
    tau: float
    p: float


@dataclass(frozen=True)
class SelfLoop:
    node: str
    value: float
    tau: float
    p: float


@dataclass(frozen=True)
class CausalGraph:
    """Significance-filtered directed graph; edge order is (target, source) index order."""

    nodes: tuple
    edges: tuple
    self_loops: tuple
    alpha: float
    min_tau: Optional[float] = None


def _target_rows(design, ydots, i, normalize, mode):
    """T/P/TAU/SE rows plus noise share for target i. Pure; safe under threads."""
    d = design.d
    fit = _est._fit_from_design(design, ydots[i], i)
    self_est = _est._self_estimate(fit)
    if mode == "multivariate":
        flows = [_est._pair_estimate(fit, j) for j in range(d) if j != i]
    else:
        yc = ydots[i] - ydots[i].mean()
        den = design.n_eff - 1
        cd = (design.centered @ yc) / den
        cdd = float(yc @ yc) / den
        c = design.C
        flows = [
            _est._bivariate_from_moments(
                c[i, i], c[j, j], c[i, j], cd[i], cd[j], cdd, design.n_eff, source=j, target=i
            )
            for j in range(d)
            if j != i
        ]
    noise = float("nan")
    if normalize:
        budget = _est.normalize_flows(flows, self_est, fit)
        flows, self_est, noise = budget.flows, budget.self_flow, budget.noise_share

    t_row = np.empty(d)
    p_row = np.empty(d)
    tau_row = np.full(d, np.nan)
    se_row = np.empty(d)
    for est in flows:
        t_row[est.source] = est.value
        p_row[est.source] = est.p_value
        se_row[est.source] = est.std_err
        if est.normalized is not None:
            tau_row[est.source] = est.normalized
    t_row[i] = self_est.value
    p_row[i] = self_est.p_value
    se_row[i] = self_est.std_err
    if self_est.normalized is not None:
        tau_row[i] = self_est.normalized
    return t_row, p_row, tau_row, se_row, noise


def all_pairs(
    tss: TimeSeriesSet,
    k: int = 1,
    alpha: float = 0.05,
    normalize: bool = True,
    mode: str = "multivariate",
    workers: int = 1,
) -> FlowMatrix:
    """Every directed rate (plus self rates on the diagonal) in one pass.

    One regression per target serves all of that target's incoming flows.
    ``mode="bivariate"`` computes off-diagonal entries from pair moments
    only (no conditioning on the remaining components); the diagonal and
    the noise share always come from the full fit. With ``workers > 1``
    targets are evaluated in a thread pool; results are assembled in index
    order and are bit-identical to the single-worker run.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if tss.d < 2:
        raise ValidationError("all-pairs analysis needs at least two variables")
    design = _est._design_for(tss, k)
    ydots = [forward_difference(tss.values[i], k, tss.dt) for i in range(tss.d)]

    def one(i):
        try:
            return _target_rows(design, ydots, i, normalize, mode)
        except NumericalError as e:
            raise type(e)(f"while computing flows into {tss.names[i]!r}: {e}") from e

    targets = range(tss.d)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, targets))
    else:
        rows = [one(i) for i in targets]

    return FlowMatrix(
        names=tss.names,
        dt=tss.dt,
        k=int(k),
        alpha=float(alpha),
        mode=mode,
        T=np.vstack([r[0] for r in rows]),
        P=np.vstack([r[1] for r in rows]),
        TAU=np.vstack([r[2] for r in rows]),
        SE=np.vstack([r[3] for r in rows]),
        noise_share=np.array([r[4] for r in rows]),
    )


def build_graph(
    fm: FlowMatrix,
    alpha: Optional[float] = None,
    min_tau: Optional[float] = None,
    bonferroni: bool = False,
) -> CausalGraph:
    """Keep relations with p < alpha (strict), optionally also |tau| >= min_tau.

    ``alpha`` defaults to the level recorded in the matrix. With
    ``bonferroni=True`` the threshold becomes alpha / d^2 (d^2 tests:
    d(d-1) pairs plus d self rates). Self loops are filtered by the same
    rule. Edges are emitted in (target index, source index) order.
    """
    alpha = fm.alpha if alpha is None else float(alpha)
    d = fm.d
    if min_tau is not None and np.isnan(fm.TAU).all():
        raise ValidationError("min_tau filtering needs a matrix computed with normalize=True")
    threshold = alpha / (d * d) if bonferroni else alpha

    def keep(i, j):
        if not fm.P[i, j] < threshold:
            return False
        return min_tau is None or abs(fm.TAU[i, j]) >= min_tau

    edges = tuple(
        Edge(
            source=fm.names[j],
            target=fm.names[i],
            value=float(fm.T[i, j]),
            tau=float(fm.TAU[i, j]),
            p=float(fm.P[i, j]),
        )
        for i in range(d)
        for j in range(d)
        if i != j and keep(i, j)
    )
    loops = tuple(
        SelfLoop(
            node=fm.names[i],
            value=float(fm.T[i, i]),
            tau=float(fm.TAU[i, i]),
            p=float(fm.P[i, i]),
        )
        for i in range(d)
        if keep(i, i)
    )
    return CausalGraph(
        nodes=fm.names, edges=edges, self_loops=loops, alpha=alpha, min_tau=min_tau
    )


def _dot_name(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_label(value, tau, p) -> str:
    return f'[label="T={value:.4g} tau={tau:.4g} p={p:.4g}"]'


def emit_dot(g: CausalGraph) -> str:
    """Graphviz DOT text; identical graphs serialize to identical bytes."""
    lines = ["digraph G {"]
    for n in g.nodes:
        lines.append(f"  {_dot_name(n)};")
    for e in g.edges:
        lines.append(
            f"  {_dot_name(e.source)} -> {_dot_name(e.target)} {_dot_label(e.value, e.tau, e.p)};"
        )
    for s in g.self_loops:
        lines.append(
            f"  {_dot_name(s.node)} -> {_dot_name(s.node)} {_dot_label(s.value, s.tau, s.p)};"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _null_nan(x: float):
    x = float(x)
    return None if np.isnan(x) else x


def _matrix_out(a: np.ndarray):
    return [[_null_nan(v) for v in row] for row in a]


def emit_json(obj) -> str:
    """Serialize a FlowMatrix or CausalGraph to JSON (NaN becomes null).

    Numbers round-trip exactly: parsing the text recovers every float
    bit-for-bit (see :func:`flow_matrix_from_json`). The orientation field
    documents the T[target][source] convention in the output itself.
    """
    if isinstance(obj, FlowMatrix):
        payload = {
            "orientation": "T[target][source]",
            "names": list(obj.names),
            "dt": obj.dt,
            "k": obj.k,
            "alpha": obj.alpha,
            "mode": obj.mode,
            "T": _matrix_out(obj.T),
            "P": _matrix_out(obj.P),
            "TAU": _matrix_out(obj.TAU),
            "SE": _matrix_out(obj.SE),
            "noise_share": [_null_nan(v) for v in obj.noise_share],
        }
    elif isinstance(obj, CausalGraph):
        payload = {
            "orientation": "T[target][source]",
            "nodes": list(obj.nodes),
            "alpha": obj.alpha,
            "min_tau": obj.min_tau,
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "T": e.value,
                    "tau": _null_nan(e.tau),
                    "p": e.p,
                }
                for e in obj.edges
            ],
            "self_loops": [
                {"node": s.node, "value": s.value, "tau": _null_nan(s.tau), "p": s.p}
                for s in obj.self_loops
            ],
        }
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _nan_null(x):
    return np.nan if x is None else float(x)


def flow_matrix_from_json(text: str) -> FlowMatrix:
    """Inverse of ``emit_json`` for flow matrices (null becomes NaN)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedError(f"not valid JSON: {e}") from None
    required = ("orientation", "names", "dt", "k", "alpha", "T", "P", "TAU", "SE", "noise_share")
    missing = [key for key in required if key not in raw]
    if missing:
        raise MalformedError(f"flow-matrix JSON is missing keys: {missing}")
    if raw["orientation"] != "T[target][source]":
        raise MalformedError(f"unsupported orientation {raw['orientation']!r}")

    def arr(key):
        return np.array(
            [[_nan_null(v) for v in row] for row in raw[key]], dtype=float
        )

    return FlowMatrix(
        names=tuple(raw["names"]),
        dt=float(raw["dt"]),
        k=int(raw["k"]),
        alpha=float(raw["alpha"]),
        mode=raw.get("mode", "multivariate"),
        T=arr("T"),
        P=arr("P"),
        TAU=arr("TAU"),
        SE=arr("SE"),
        noise_share=np.array([_nan_null(v) for v in raw["noise_share"]], dtype=float),
    )
