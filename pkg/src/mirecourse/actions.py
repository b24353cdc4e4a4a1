"""Discretised action grids, separable costs and the closed-form linear action."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import FeatureMeta, IncompleteInstance
from .models import LinearModel, decision_function


@dataclass(frozen=True)
class CostSpec:
    """``weighted_l1`` (needs ``weights``) or ``tlps`` (needs quantile tables)."""

    kind: str
    weights: Optional[np.ndarray] = None
    quantiles: Optional[tuple] = None

    @classmethod
    def weighted_l1(cls, weights) -> "CostSpec":
        w = np.array(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weighted_l1 weights must be positive")
        return cls("weighted_l1", weights=w)

    @classmethod
    def tlps(cls, metas: Sequence[FeatureMeta]) -> "CostSpec":
        return cls("tlps", quantiles=tuple(m.quantiles for m in metas))

    def feature_costs(self, d: int, x_d: float, values) -> np.ndarray:
        """Cost of each displacement in ``values`` for feature ``d`` at ``x_d``."""
        values = np.asarray(values, dtype=float)
        if self.kind == "weighted_l1":
            return self.weights[d] * np.abs(values)
        if self.kind == "tlps":
            q = self.quantiles[d]
            if q is None:
                raise ValueError(f"no quantile table for feature {d}")
            before = 1.0 - q(x_d)
            after = 1.0 - q(x_d + values)
            if before <= 0 or np.any(after <= 0):
                raise ValueError("TLPS undefined where the CDF reaches 1")
            out = np.abs(np.log(after / before))
            out[values == 0] = 0.0
            return out
        raise ValueError(f"unknown cost kind {self.kind!r}")


def cost(a, spec: CostSpec, x_ref) -> float:
    """Separable cost of action ``a`` taken from ``x_ref`` (NaN = missing)."""
    a = np.asarray(a, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    total = 0.0
    for d, ad in enumerate(a):
        if ad == 0:
            continue
        if math.isnan(x_ref[d]):
            raise ValueError(f"feature {d} is missing but the action moves it")
        total += float(spec.feature_costs(d, x_ref[d], [ad])[0])
    return total


@dataclass(frozen=True)
class ActionGrid:
    values: tuple  # per feature: np.ndarray of displacements (sorted, contains 0)
    costs: tuple  # per feature: np.ndarray of matching costs
    reference: np.ndarray  # the instance the grid was built at (NaN = missing)

    @property
    def n_features(self):
        return len(self.values)

    @property
    def actionable(self):
        """Features with more than one choice."""
        return tuple(d for d, v in enumerate(self.values) if len(v) > 1)

    def size(self):
        return int(np.prod([len(v) for v in self.values]))

    def cost_of(self, a) -> float:
        total = 0.0
        for d, ad in enumerate(np.asarray(a, dtype=float)):
            j = np.flatnonzero(self.values[d] == ad)
            if len(j) == 0:
                raise ValueError(f"action value {ad!r} for feature {d} is not on the grid")
            total += float(self.costs[d][j[0]])
        return total

    def contains(self, a) -> bool:
        return all(np.any(self.values[d] == ad) for d, ad in enumerate(np.asarray(a, dtype=float)))

    def enumerate(self):
        """All grid actions as an (K, D) array (use only on small grids)."""
        mesh = np.meshgrid(*self.values, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def enumerate_costs(self):
        mesh = np.meshgrid(*self.costs, indexing="ij")
        return np.sum([m.ravel() for m in mesh], axis=0)


def _fit_inside(x, a, lo, hi):
    # guard against x + (v - x) landing one ulp outside the box
    out = []
    for v in a:
        while x + v > hi:
            v = np.nextafter(v, -np.inf)
        while x + v < lo:
            v = np.nextafter(v, np.inf)
        out.append(v)
    return np.array(out)


def feature_grid(meta: FeatureMeta, x_d: float, bins: int) -> np.ndarray:
    if meta.actionable == "immutable" or math.isnan(x_d):
        return np.array([0.0])
    lo, hi = meta.lower, meta.upper
    if meta.kind == "continuous":
        targets = np.linspace(lo, hi, bins + 1)
        vals = _fit_inside(x_d, targets - x_d, lo, hi)
    else:
        start, stop = math.ceil(lo - x_d), math.floor(hi - x_d)
        steps = np.arange(start, stop + 1, dtype=float)
        if len(steps) > bins + 1:
            steps = np.unique(np.round(np.linspace(start, stop, bins + 1)))
        vals = steps
    vals = np.unique(np.append(vals, 0.0))
    if meta.actionable == "increase-only":
        vals = vals[vals >= 0]
    elif meta.actionable == "decrease-only":
        vals = vals[vals <= 0]
    return vals


def build_grid(x: IncompleteInstance, metas: Sequence[FeatureMeta], bins=10,
               cost_spec: Optional[CostSpec] = None) -> ActionGrid:
    """Per-feature displacement grids spanning the reachable interval.

    Missing and immutable features only get the zero displacement. ``bins``
    may be an int or one count per feature.
    """
    values = np.asarray(x.values if isinstance(x, IncompleteInstance) else x, dtype=float)
    D = len(metas)
    per = [bins] * D if np.isscalar(bins) else list(bins)
    if any(b < 1 for b in per):
        raise ValueError("bins must be >= 1")
    grids = tuple(feature_grid(m, values[d], per[d]) for d, m in enumerate(metas))
    if cost_spec is None:
        cost_spec = CostSpec.weighted_l1(np.ones(D))
    costs = tuple(
        cost_spec.feature_costs(d, values[d], g) if len(g) > 1 else np.zeros(1)
        for d, g in enumerate(grids)
    )
    ref = values.copy()
    ref.setflags(write=False)
    return ActionGrid(grids, costs, ref)


def explicit_grid(values, costs, reference=None) -> ActionGrid:
    """Grid given value-by-value (tests, 1-parameter action families)."""
    values = tuple(np.asarray(v, dtype=float) for v in values)
    costs = tuple(np.asarray(c, dtype=float) for c in costs)
    for v, c in zip(values, costs):
        if len(v) != len(c) or not np.any(v == 0):
            raise ValueError("every feature grid needs 0 and one cost per value")
        if np.any(c[v == 0] != 0):
            raise ValueError("the zero displacement must cost 0")
    if reference is None:
        reference = np.zeros(len(values))
    return ActionGrid(values, costs, np.asarray(reference, dtype=float))


def closed_form_linear(model: LinearModel, x) -> np.ndarray:
    """Minimum-l2 valid action for a linear classifier over an unbounded domain."""
    x = np.asarray(x, dtype=float)
    beta = model.coef
    nrm2 = float(beta @ beta)
    if nrm2 == 0:
        raise ValueError("coefficient vector is zero")
    f = decision_function(model, x)
    if f >= 0:
        return np.zeros_like(x)
    t = -f / nrm2
    # land on the boundary, stepping past it if rounding leaves the score negative
    step = t * 2.0 ** -52
    while decision_function(model, x + t * beta) < 0:
        t += step
        step *= 2.0
    return t * beta
