"""Empirical parametrized-measure diagnostics for level families.

Trajectories computed at several dyadic levels are pooled into one discrete
probability measure per coarse space-time cell.  The diagnostics quantify
whether the family collapses (spread of the atoms shrinks with the level),
whether the averaged driving force converges to the gradient of the remanent
energy at the barycenter, and whether the weak solution inequality holds for
the empirical measure within tolerance.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AtomOutsideDomain, MismatchedScenario
from .potentials import BallIndicator, fenchel_residual, full_contains, full_grad, full_value


@dataclass(frozen=True)
class ReferencePartition:
    """Coarse space-time partition used to bin trajectory samples.

    time_edges : increasing array of time bin edges (nt+1,)
    cell_groups : list of integer arrays, a partition of the grid cells
    """

    time_edges: np.ndarray
    cell_groups: tuple


def uniform_partition(time_grid, grid, n_time_bins, n_cell_groups=None):
    """Equal time bins; grid cells split into contiguous groups."""
    edges = np.linspace(0.0, time_grid.T, n_time_bins + 1)
    if n_cell_groups is None:
        n_cell_groups = grid.n_cells
    groups = tuple(np.array_split(np.arange(grid.n_cells), n_cell_groups))
    groups = tuple(g for g in groups if len(g))
    return ReferencePartition(time_edges=edges, cell_groups=groups)


@dataclass
class EmpiricalYoungMeasure:
    """Weighted atoms per (time bin, cell group) of a reference partition.

    atoms[i][j] is an (n_ij, k) array, weights[i][j] an (n_ij,) probability
    vector; first_moment and spread are (nt, ng, k) and (nt, ng).
    """

    partition: ReferencePartition
    atoms: list
    weights: list
    first_moment: np.ndarray
    spread: np.ndarray

    @property
    def max_spread(self):
        return float(self.spread.max(initial=0.0))


def build_measure(trajectories, volumes, partition):
    """Pool piecewise-constant interpolant values of several levels.

    Each step of each trajectory contributes one atom per grid cell with
    weight h * volume; weights are normalized per partition cell.  All
    trajectories must share the grid and final time.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    T = trajectories[0].time_grid.T
    n_cells = trajectories[0].z_nodes.shape[1]
    for tr in trajectories:
        if tr.time_grid.T != T or tr.z_nodes.shape[1] != n_cells:
            raise MismatchedScenario(
                "trajectories disagree on the final time or the grid")
    edges = np.asarray(partition.time_edges, dtype=float)
    nt = len(edges) - 1
    ng = len(partition.cell_groups)
    k = trajectories[0].z_nodes.shape[2]

    atoms = [[[] for _ in range(ng)] for _ in range(nt)]
    wts = [[[] for _ in range(ng)] for _ in range(nt)]
    for tr in trajectories:
        h = tr.time_grid.h
        mids = (np.arange(tr.time_grid.n_steps) + 0.5) * h
        bins = np.clip(np.searchsorted(edges, mids, side="right") - 1, 0, nt - 1)
        for n, i in enumerate(bins):
            zn = tr.z_nodes[n + 1]
            for j, group in enumerate(partition.cell_groups):
                atoms[i][j].append(zn[group])
                wts[i][j].append(h * volumes[group])

    out_atoms, out_w = [], []
    first = np.zeros((nt, ng, k))
    spread = np.zeros((nt, ng))
    for i in range(nt):
        row_a, row_w = [], []
        for j in range(ng):
            a = np.concatenate(atoms[i][j], axis=0)
            w = np.concatenate(wts[i][j])
            w = w / w.sum()
            row_a.append(a)
            row_w.append(w)
            bar = w @ a
            first[i, j] = bar
            spread[i, j] = np.sqrt(w @ np.sum((a - bar) ** 2, axis=-1))
        out_atoms.append(row_a)
        out_w.append(row_w)
    return EmpiricalYoungMeasure(
        partition=partition, atoms=out_atoms, weights=out_w,
        first_moment=first, spread=spread,
    )


def measure_at_time(trajectories, volumes, t, grid_cells_as_groups=True):
    """Cross-level measure at a fixed time: atoms are the levels' interpolant
    values, weighted by their step sizes.

    This is the pointwise-in-time counterpart of :func:`build_measure`: the
    collapse of these measures to a Dirac as the levels refine is the
    discrete signature of a strong (single-valued) limit.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    T = trajectories[0].time_grid.T
    n_cells = trajectories[0].z_nodes.shape[1]
    for tr in trajectories:
        if tr.time_grid.T != T or tr.z_nodes.shape[1] != n_cells:
            raise MismatchedScenario(
                "trajectories disagree on the final time or the grid")
    k = trajectories[0].z_nodes.shape[2]
    hs = np.array([tr.time_grid.h for tr in trajectories])
    wts = hs / hs.sum()
    groups = tuple(np.array([c]) for c in range(n_cells))
    part = ReferencePartition(time_edges=np.array([t, t]), cell_groups=groups)
    samples = np.stack([tr.z_const(t) for tr in trajectories])   # (nl, nc, k)

    atoms, weights = [], []
    first = np.zeros((1, n_cells, k))
    spread = np.zeros((1, n_cells))
    row_a, row_w = [], []
    for c in range(n_cells):
        a = samples[:, c, :]
        row_a.append(a)
        row_w.append(wts.copy())
        bar = wts @ a
        first[0, c] = bar
        spread[0, c] = np.sqrt(wts @ np.sum((a - bar) ** 2, axis=-1))
    atoms.append(row_a)
    weights.append(row_w)
    return EmpiricalYoungMeasure(partition=part, atoms=atoms, weights=weights,
                                 first_moment=first, spread=spread)


def eval_F(measure, f_spec, strain_dim):
    """Measure-averaged driving force F = int grad f dmu per partition cell."""
    nt = len(measure.atoms)
    ng = len(measure.atoms[0])
    k = measure.first_moment.shape[-1]
    out = np.zeros((nt, ng, k))
    for i in range(nt):
        for j in range(ng):
            a = measure.atoms[i][j]
            if not np.all(full_contains(f_spec, a, strain_dim)):
                raise AtomOutsideDomain(
                    f"atom outside the domain of the remanent energy in bin ({i}, {j})")
            out[i, j] = measure.weights[i][j] @ full_grad(f_spec, a, strain_dim)
    return out


@dataclass
class MVSResidualReport:
    """Both sides of the measure-valued weak inequality and their gap."""

    lhs: float
    rhs: float

    @property
    def slack(self):
        return self.rhs - self.lhs


def mvs_residual(traj, problem, f_spec, g_spec, measure=None):
    """Weak-inequality residual of one trajectory's step data.

    LHS integrates g*(rate) + g((sigma, E) - L_m z - F) over space-time; RHS
    is the duality pairing of the rate with the same argument, with the inner
    integral computed cell-by-cell in time first, never as a reordered global
    quadrature.  L_m includes the level's vanishing regularization (it
    belongs to the discrete flow rule and disappears only in the limit), and
    F is the gradient of the remanent energy at the trajectory value unless a
    pooled measure is supplied, in which case the measure-averaged driving
    force of its space-time bin is used.  For a certified trajectory the
    slack equals minus the aggregate of the per-step duality certificates up
    to the measure-averaging error.
    """
    vol = problem.vol
    h = traj.time_grid.h
    s = problem.s
    Lm = problem.L + problem.reg * np.eye(problem.L.shape[0])
    F_bins = None
    if measure is not None:
        F_bins = eval_F(measure, f_spec, s)
        edges = np.asarray(measure.partition.time_edges, dtype=float)
        groups = measure.partition.cell_groups
    lhs = 0.0
    rhs = 0.0
    rates = traj.rates
    for n in range(traj.time_grid.n_steps):
        z = traj.z_nodes[n + 1]
        if F_bins is None:
            F = full_grad(f_spec, z, s)
        else:
            mid = (n + 0.5) * h
            i = int(np.clip(np.searchsorted(edges, mid, side="right") - 1,
                            0, F_bins.shape[0] - 1))
            F = np.empty_like(z)
            for j, group in enumerate(groups):
                F[group] = F_bins[i, j]
        arg = traj.sigma_E[n] - z @ Lm.T - F
        rate = rates[n]
        if isinstance(g_spec, BallIndicator):
            arg_in = g_spec.prox(1.0, arg)
            g_vals = g_spec.value(arg_in)
            corr = np.sum(rate * (arg_in - arg), axis=-1)
        else:
            g_vals = g_spec.value(arg)
            corr = 0.0
        lhs += h * float(np.sum(vol * (g_spec.conjugate_value(rate) + g_vals + corr)))
        rhs += h * float(np.sum(vol * np.sum(rate * arg, axis=-1)))
    return MVSResidualReport(lhs=lhs, rhs=rhs)


def convergence_study(results, f_spec, strain_dim, volumes, partition):
    """Cross-level collapse diagnostics.

    Parameters
    ----------
    results : list of (level, Trajectory) sorted by level.

    Returns a dict with per-level spreads (pooling levels up to each entry),
    the deviation of the averaged driving force from grad f at the first
    moment, and pairwise level differences of the final state.
    """
    results = sorted(results, key=lambda lr: lr[0])
    levels = [lv for lv, _ in results]
    trajs = [tr for _, tr in results]

    spreads = []
    F_dev = []
    for i in range(1, len(trajs) + 1):
        mu = build_measure(trajs[:i], volumes, partition)
        spreads.append(mu.max_spread)
        F = eval_F(mu, f_spec, strain_dim)
        nt, ng, k = F.shape
        grad_bar = np.zeros_like(F)
        for a in range(nt):
            grad_bar[a] = full_grad(f_spec, mu.first_moment[a], strain_dim)
        F_dev.append(float(np.abs(F - grad_bar).max(initial=0.0)))

    final_diffs = []
    for i in range(1, len(trajs)):
        za, zb = trajs[i - 1].z_nodes[-1], trajs[i].z_nodes[-1]
        w = volumes / volumes.sum()
        final_diffs.append(float(np.sqrt(np.sum(w[:, None] * (za - zb) ** 2))))

    # spread of each level alone (collapse monotonicity check)
    solo_spreads = []
    for tr in trajs:
        mu = build_measure([tr], volumes, partition)
        solo_spreads.append(mu.max_spread)

    return {
        "levels": levels,
        "pooled_spreads": spreads,
        "solo_spreads": solo_spreads,
        "F_deviation": F_dev,
        "final_state_diffs": final_diffs,
    }
