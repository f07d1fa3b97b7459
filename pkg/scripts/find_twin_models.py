"""Search for two 3-variable views that only a two-variable intervention separates.

Each candidate is a four-variable model whose first causal position holds a
hidden root L, watched through its observed margin over (X1, X2, X3).  The
pair is found by bounded least squares over both models' joint disturbance
tables, links, and interaction blocks, so that the two views agree on the
passive distribution and on every single intervention yet disagree on
P(X3 = 1 | do(X1 = 1, X2 = 1)).

The extra structure is necessary.  Once passive data and all three single
interventions are available, every ordered pair is covered and a plain
three-variable model is fully identified, so no plain pair can disagree
anywhere.  An interaction block on (X1, X2) does not help either: the
stratified single-intervention distributions pin every product of
disturbance mass and mechanism failure that a two-variable intervention can
reach (the only slack is a scaling of the X3 disturbance margin against the
mechanism, and the double intervention is invariant along that scaling).
Freedom appears once X3 has a hidden parent whose coupling is not a plain
OR, which is what the blocks on (L, X1) and (L, X2) provide.

Two search details matter.  A hidden binary root with otherwise independent
disturbance terms is too rigid in practice (bounded searches bottom out with
milli-scale matching residuals), so each disturbance ranges over its full
joint table.  And fixing one endpoint by hand leaves only a thin fiber of
exact matches whose double-intervention range is milli-scale around it, so
the search moves both endpoints at once: matching residuals cover the
passive distribution plus each single intervention at two randomization
probabilities (a distribution under do(X_i ~ p) is affine in p, so agreement
at two interior points extends to the whole family), and a hinge residual
pushes the double-intervention conditionals apart by a margin.  A final
corrector pass re-solves the matching system alone, confirming the pair sits
on the exact-agreement variety to machine precision.

Run as a script; it prints the achieved agreement and disagreement figures
and the frozen constant block embedded in the acceptance tests.
"""

from __future__ import annotations

import sys

import numpy as np
from scipy.optimize import least_squares

from noisyor.generate import InteractiveModel, marginalize_latents
from noisyor.model import Model, multi_spec, passive_spec, single_spec

NAMES = ("L", "X1", "X2", "X3")
ORDER = (0, 1, 2, 3)

# Parameter layout (37 values per model): joint disturbance table over
# (E_L, E_1, E_2, E_3) with E_L as the most significant bit (16 cells,
# normalized inside the builder), links (L->X1, L->X2, L->X3, X1->X3,
# X2->X3), then interaction blocks for X2 on (L, X1) and for X3 on (L, X1),
# (L, X2), (X1, X2), four states each (on-on, on-off, off-on, off-off).
N_CELLS = 16
N_PARAMS = N_CELLS + 5 + 16

LOWER = np.array([1e-4] * N_CELLS + [0.01] * 5 + [0.0] * 16)
UPPER = np.array([1.0] * N_CELLS + [0.99] * 5 + [0.95] * 16)


def _anchor_params():
    # Starting point only: product of per-term rates, tilted toward agreement
    # between E_1 and E_2 and between E_L and E_3 so the search begins at a
    # visibly confounded interior model.
    cells = np.ones(1)
    for rate in (0.40, 0.22, 0.18, 0.12):
        cells = np.kron(cells, np.array([1.0 - rate, rate]))
    idx = np.arange(N_CELLS)
    e_l, e_1, e_2, e_3 = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
    cells = cells * np.where(e_1 == e_2, 1.4, 1.0) * np.where(e_l == e_3, 1.25, 1.0)
    cells /= cells.sum()
    links = [0.55, 0.62, 0.30, 0.48, 0.42]
    blocks = [
        0.12, 0.05, 0.06, 0.02,  # X2 on (L, X1)
        0.25, 0.10, 0.08, 0.05,  # X3 on (L, X1)
        0.20, 0.12, 0.06, 0.04,  # X3 on (L, X2)
        0.15, 0.05, 0.07, 0.03,  # X3 on (X1, X2)
    ]
    return np.concatenate([cells, links, blocks])


ANCHOR = _anchor_params()

GAP_MARGIN = 0.08
GAP_WEIGHT = 0.5

MATCH_SPECS = [passive_spec()] + [single_spec(i, p) for i in range(3) for p in (0.3, 0.7)]
VERIFY_SPECS = [passive_spec()] + [
    single_spec(i, p) for i in range(3) for p in (0.1, 0.25, 0.5, 0.75, 0.9)
]


def build_view(params):
    cells = np.asarray(params[:N_CELLS], dtype=float)
    a1, a2, a3, b1, b2 = params[N_CELLS:N_CELLS + 5]
    blocks = np.asarray(params[N_CELLS + 5:]).reshape(4, 4)
    base = Model(
        NAMES,
        ORDER,
        {(0, 1): a1, (0, 2): a2, (0, 3): a3, (1, 3): b1, (2, 3): b2},
        cells / cells.sum(),
    )
    inter = {
        (2, 0, 1): tuple(blocks[0]),
        (3, 0, 1): tuple(blocks[1]),
        (3, 0, 2): tuple(blocks[2]),
        (3, 1, 2): tuple(blocks[3]),
    }
    return marginalize_latents(InteractiveModel(base, inter), 1)


def double_conditional(view):
    """P(X3 = 1 | X1 = 1, X2 = 1) under a joint randomization of X1 and X2."""
    dist = view.exact_distribution(multi_spec((0, 1), 0.5))
    return dist.conditional(2, 1, {0: 1, 1: 1})


def match_error(view_a, view_b, specs):
    return max(
        float(np.abs(view_a.exact_distribution(s).probs - view_b.exact_distribution(s).probs).max())
        for s in specs
    )


def _match_residuals(xx):
    va = build_view(xx[:N_PARAMS])
    vb = build_view(xx[N_PARAMS:])
    return np.concatenate(
        [va.exact_distribution(s).probs - vb.exact_distribution(s).probs for s in MATCH_SPECS]
    )


def _gap(xx):
    return double_conditional(build_view(xx[:N_PARAMS])) - double_conditional(
        build_view(xx[N_PARAMS:])
    )


def _penalized(xx):
    return np.append(_match_residuals(xx), GAP_WEIGHT * max(0.0, GAP_MARGIN - _gap(xx)))


def search(seed=3):
    """Joint search over both endpoints, then a match-only corrector polish."""
    lo = np.concatenate([LOWER, LOWER])
    hi = np.concatenate([UPPER, UPPER])
    rng = np.random.default_rng(seed)
    nudged = np.clip(ANCHOR + rng.normal(0.0, 0.02, N_PARAMS), LOWER + 1e-3, UPPER - 1e-3)
    x0 = np.concatenate([ANCHOR, nudged])
    fit = least_squares(
        _penalized, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=None, max_nfev=40000
    )
    polish = least_squares(
        _match_residuals, fit.x, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=None,
        max_nfev=40000,
    )
    return polish.x


def main():
    for seed in (3, 1, 2, 4, 5, 6):
        xx = search(seed)
        view_a = build_view(xx[:N_PARAMS])
        view_b = build_view(xx[N_PARAMS:])
        err = match_error(view_a, view_b, VERIFY_SPECS)
        gap = double_conditional(view_a) - double_conditional(view_b)
        print(f"seed {seed}: match {err:.3e} gap {gap:+.6f}", file=sys.stderr)
        if err < 1e-12 and abs(gap) > GAP_MARGIN * 0.9:
            break
    else:
        sys.exit("no pair found: matching residuals or the gap never converged")

    print(f"max |cell difference| over passive + singles (p grid): {err:.3e}")
    print(f"P(X3=1 | do(X1=1, X2=1)) model A: {double_conditional(view_a):.6f}")
    print(f"P(X3=1 | do(X1=1, X2=1)) model B: {double_conditional(view_b):.6f}")
    dd = multi_spec((0, 1), 0.5)
    cell_gap = np.abs(
        view_a.exact_distribution(dd).probs - view_b.exact_distribution(dd).probs
    ).max()
    print(f"max |cell difference| under do(X1, X2) at p=0.5: {cell_gap:.6f}")

    print("\n# frozen constants for the acceptance test")
    for name, params in (("TWIN_A", xx[:N_PARAMS]), ("TWIN_B", xx[N_PARAMS:])):
        print(f"{name} = np.array([")
        for v in params:
            print(f"    {float(v)!r},")
        print("])")


if __name__ == "__main__":
    main()
