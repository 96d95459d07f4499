"""Loewner-evolution numerics for the driving SDEs and their diagnostics.

Simulates driving functions for SLE_kappa with force points (linear drift),
the hypergeometric SLE_8, and the slit-map reference flow whose drift is
2 d/dz log d/dz phi_1; reconstructs traces from driving records, extracts
driving functions from discrete curves with a vertical-slit zipper, and
evaluates the hypergeometric and determinant martingales along paths.

Conventions.  Capacity parametrization g_t(z) = z + 2t/z + O(1/z^2); force
points evolve by dg = 2 dt / (g - W).  An absorbing event is the collapse of
a tracked gap below ``gap_floor``; simulations that do not declare
``absorb_on_collision`` raise StepUnderflow instead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .conformal import _M_CAP, elliptic_2f1, slit_rect_map
from .errors import (
    ConfigError,
    DomainError,
    RejectionBudgetExceeded,
    SelfTouchTolerance,
    StepUnderflow,
)

_DRIFT_KINDS = ("linear", "hypergeometric", "slitmap")
_GAP_SAFETY = 0.2  # step size factor: h <= safety * min_gap^2 / kappa
_H_FLOOR_FRAC = 1e-3  # substep never shrinks below this fraction of dt
_REPULSION_BUDGET = 2_000  # pinned-track events before declaring collapse


def _agm_f_and_prime(m):
    """Vectorized 2F1(1/2,1/2,1;m) and its derivative via the AGM."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0.0) or np.any(m > _M_CAP):
        raise DomainError("2F1 argument outside [0, cap] in SDE drift")
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    c = np.sqrt(m)
    csum = 0.5 * m
    k = 0
    while np.max(np.abs(c)) > 4e-16 and k < 60:
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        k += 1
        csum = csum + 2.0 ** (k - 1) * c * c
    K = math.pi / 2.0 / a
    E = K * (1.0 - csum)
    f = 2.0 / math.pi * K
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = (2.0 / math.pi) * (E - (1.0 - m) * K) / (2.0 * m * (1.0 - m))
    fp = np.where(m == 0.0, 0.25, fp)
    return f, fp


@dataclass(frozen=True)
class SleConfig:
    """Parameters of one driving-function simulation.

    force_points are (position, weight) pairs entering the linear drift
    sum rho_i / (W - g_t(x_i)); for the hypergeometric kind they are the
    marked points (d, a) and the weights are ignored; for the slit-map kind
    they are the 2n marked reals and the drift is computed from the slit
    tips of the current configuration.  z_points are passively tracked
    points whose images and derivatives g_t'(z) are recorded (the
    determinant-martingale ingredients); markers are passively tracked
    points used to locate boundary hitting positions.

    When absorb_on_collision is set, absorbing_tracks selects which gap
    collapses end the path: force-point indices and/or the string
    "markers"; None means every tracked gap.  Weight-2 force points of an
    SLE_8 graze the driver arbitrarily closely without being swallowed,
    so runs that must distinguish a graze from a genuine hit restrict the
    absorbing set; non-absorbing tracks are held at the micro-repulsion
    floor instead.
    """

    kappa: float
    force_points: tuple = ()
    drift_kind: str = "linear"
    T: float = 1.0
    dt: float = 1e-4
    w0: float = 0.0
    z_points: tuple = ()
    markers: tuple = ()
    absorb_on_collision: bool = False
    absorbing_tracks: tuple = None
    gap_floor: float = 1e-9
    gap_safety: float = _GAP_SAFETY
    record_every: int = 1

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 < self.gap_safety <= 0.5:
            raise ConfigError("gap_safety must lie in (0, 0.5]")
        if self.drift_kind not in _DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {self.drift_kind!r}")
        if self.T <= 0.0 or self.dt <= 0.0 or self.dt > self.T:
            raise ConfigError("need 0 < dt <= T")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        pos = [p for p, _ in self.force_points]
        if self.absorbing_tracks is not None:
            for sel in self.absorbing_tracks:
                if sel == "markers":
                    continue
                if not isinstance(sel, int) or not 0 <= sel < len(pos):
                    raise ConfigError(
                        f"absorbing track {sel!r} is not a force-point "
                        "index or 'markers'")
        if self.drift_kind == "hypergeometric":
            if len(pos) != 2 or not self.w0 < pos[0] < pos[1]:
                raise ConfigError(
                    "hypergeometric drift needs marked points w0 < d < a")
        if self.drift_kind == "slitmap":
            if len(pos) < 4 or len(pos) % 2:
                raise ConfigError("slit-map drift needs 2n >= 4 marked reals")
            if not all(x < y for x, y in zip(pos, pos[1:])):
                raise ConfigError("marked reals must be strictly increasing")
            if not pos[1] < self.w0 < pos[2]:
                raise ConfigError(
                    "slit-map start point must lie inside the first wired arc")


@dataclass
class DrivingRecord:
    """Sampled driving function with its tracked points.

    times is the recording grid; forces holds g_t(x_i) column-per-force
    point, z_tracks/z_gprime the passively tracked points and their map
    derivatives, markers the marker tracks.  min_gap is the smallest gap
    |g - W| seen over the whole path.
    """

    config: SleConfig
    times: np.ndarray
    w: np.ndarray
    forces: np.ndarray
    z_tracks: np.ndarray
    z_gprime: np.ndarray
    marker_tracks: np.ndarray
    marker_swallowed: np.ndarray
    min_gap: float
    absorbed: bool
    absorption_time: float
    repulsion_events: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            header = ["t", "w"]
            header += [f"force_{i}" for i in range(self.forces.shape[1])]
            header += [f"gap_{i}" for i in range(self.forces.shape[1])]
            w.writerow(header)
            for k in range(len(self.times)):
                row = [repr(float(self.times[k])), repr(float(self.w[k]))]
                row += [repr(float(x)) for x in self.forces[k]]
                row += [repr(abs(float(x) - float(self.w[k])))
                        for x in self.forces[k]]
                w.writerow(row)


class _PathEnsemble:
    """Vectorized Euler-Maruyama state for n independent paths."""

    def __init__(self, config, seed, n_paths):
        self.cfg = config
        self.rng = np.random.default_rng(seed)
        self.n = n_paths
        pos = np.array([p for p, _ in config.force_points], dtype=np.float64)
        # a force point sitting exactly at w0 starts one floor-gap away
        attached = pos == config.w0
        pos = pos + attached * config.gap_floor
        self.rho = np.array([r for _, r in config.force_points])
        self.w = np.full(n_paths, float(config.w0))
        self.g = np.tile(pos, (n_paths, 1))
        self.z = np.tile(np.asarray(config.z_points, dtype=np.float64),
                         (n_paths, 1))
        self.zp = np.ones_like(self.z)
        self.mk = np.tile(np.asarray(config.markers, dtype=np.float64),
                          (n_paths, 1))
        self.mk_done = np.zeros(self.mk.shape, dtype=bool)
        self.t = np.zeros(n_paths)
        self.active = np.ones(n_paths, dtype=bool)
        self.absorbed = np.zeros(n_paths, dtype=bool)
        self.absorption_time = np.full(n_paths, np.nan)
        self.min_gap = np.full(n_paths, np.inf)
        self.repulsions = np.zeros(n_paths, dtype=np.int64)
        self._mu = [None] * n_paths  # warm starts for the slit solves
        nf, nz, nm = self.g.shape[1], self.z.shape[1], self.mk.shape[1]
        sel = config.absorbing_tracks
        if sel is None:
            cols = [True] * (nf + nz + nm)
        else:
            cols = [i in sel for i in range(nf)] + [False] * nz \
                + ["markers" in sel] * nm
        self._absorb_cols = np.array(cols, dtype=bool)
        self._markers_absorbing = sel is None or "markers" in sel

    def _gaps(self):
        cols = []
        if self.g.shape[1]:
            cols.append(np.abs(self.g - self.w[:, None]))
        if self.z.shape[1]:
            cols.append(np.abs(self.z - self.w[:, None]))
        if self.mk.shape[1]:
            gaps = np.abs(self.mk - self.w[:, None])
            if not (self.cfg.absorb_on_collision
                    and self._markers_absorbing):
                # a grazed marker must not pin the step size forever
                gaps = np.where(self.mk_done, np.inf, gaps)
            cols.append(gaps)
        return np.concatenate(cols, axis=1) if cols else \
            np.full((self.n, 1), np.inf)

    def _drift(self, idx):
        cfg = self.cfg
        w = self.w[idx]
        g = self.g[idx]
        if cfg.drift_kind == "linear":
            if g.shape[1] == 0:
                return np.zeros(len(w))
            return np.sum(self.rho / (w[:, None] - g), axis=1)
        if cfg.drift_kind == "hypergeometric":
            gd, ga = g[:, 0], g[:, 1]
            m = (gd - w) / (ga - w)
            m = np.clip(m, 0.0, _M_CAP)  # degenerate-gap regularization
            f, fp = _agm_f_and_prime(m)
            return (2.0 / (w - gd) - 2.0 / (w - ga)
                    - 8.0 * (ga - gd) / (ga - w) ** 2 * fp / f)
        out = np.empty(len(w))
        for row, i in enumerate(np.flatnonzero(idx)):
            y = self.g[i]
            sm = slit_rect_map(y, 1, mu0=self._mu[i])
            self._mu[i] = sm.mu
            out[row] = (2.0 * np.sum(1.0 / (self.w[i] - sm.mu))
                        - np.sum(1.0 / (self.w[i] - y)))
        return out

    def _positions(self):
        cols = [a for a in (self.g, self.z, self.mk) if a.shape[1]]
        return np.concatenate(cols, axis=1) if cols else \
            np.empty((self.n, 0))

    def advance_to(self, t_target):
        """Advance every active path to t_target with adaptive substeps.

        Tracked points are clamped one gap_floor away from the driver
        whenever a substep would cross them (micro-repulsion).  A path
        is absorbed the first time a declared absorbing gap descends to
        the gap floor.  That first-passage time is itself the stopped
        functional: the continuum gap dips this low both at a genuine
        swallowing and at a deep near-pinch of the curve, so callers
        comparing ensembles must apply the same floor to both rather
        than read the event as the exact swallowing time.
        """
        cfg = self.cfg
        absorbing = cfg.absorb_on_collision and bool(np.any(self._absorb_cols))
        while True:
            todo = self.active & (self.t < t_target - 1e-18)
            if not np.any(todo):
                return
            gaps = self._gaps()[todo]
            gmin = np.min(gaps, axis=1)
            self.min_gap[todo] = np.minimum(self.min_gap[todo], gmin)
            if absorbing:
                state_hit = np.min(gaps[:, self._absorb_cols], axis=1) \
                    <= 1.5 * cfg.gap_floor
                if np.any(state_hit):
                    hit_idx = np.flatnonzero(todo)[state_hit]
                    self.absorbed[hit_idx] = True
                    self.absorption_time[hit_idx] = self.t[hit_idx]
                    self.active[hit_idx] = False
                    todo[hit_idx] = False
                    if not np.any(todo):
                        return
                    gaps = self._gaps()[todo]
                    gmin = np.min(gaps, axis=1)
            h = np.minimum(
                t_target - self.t[todo],
                np.maximum(cfg.gap_safety * gmin * gmin / cfg.kappa,
                           _H_FLOOR_FRAC * cfg.dt))
            if absorbing:
                # resolve the absorbing gap all the way down to the
                # detection threshold: without this the floored step's
                # noise pins the track while the gap is still large,
                # turning near-pinches into false hits
                g_abs = np.min(gaps[:, self._absorb_cols], axis=1)
                h = np.minimum(h, np.maximum(
                    cfg.gap_safety * g_abs * g_abs / cfg.kappa,
                    cfg.gap_safety * cfg.gap_floor ** 2 / cfg.kappa))
            drift = self._drift(todo)
            w_cur = self.w[todo]
            # cap the drift displacement at the noise/gap scale so that
            # a pinned track cannot eject the driver
            cap = 0.5 * gmin + np.sqrt(cfg.kappa * h)
            disp = np.clip(drift * h, -cap, cap)
            nn = self.rng.standard_normal(len(w_cur))
            w_new = w_cur + disp + np.sqrt(cfg.kappa * h) * nn
            # evolve every tracked point by the exact frozen-driver flow
            # g -> W + s*sqrt((g-W)^2 + 4h), which keeps the ordering and
            # is stable at any step size, then clamp against the moved
            # driver at the micro-repulsion floor and count clamp events
            w_old = self.w[todo][:, None]
            z_before = self.z[todo].copy() if self.z.shape[1] else None
            for arr, count in ((self.g, True), (self.z, True),
                               (self.mk, False)):
                if arr.shape[1] == 0:
                    continue
                cur = arr[todo]
                side = np.where(cur >= w_old, 1.0, -1.0)
                new = w_old + side * np.sqrt((cur - w_old) ** 2
                                             + 4.0 * h[:, None])
                pinned = side * (new - w_new[:, None]) < cfg.gap_floor
                new = np.where(pinned,
                               w_new[:, None] + side * cfg.gap_floor, new)
                arr[todo] = new
                if count and np.any(pinned):
                    reps = self.repulsions[todo] + np.sum(pinned, axis=1)
                    self.repulsions[todo] = reps
                    if (not cfg.absorb_on_collision
                            and np.max(reps) > _REPULSION_BUDGET):
                        raise StepUnderflow(
                            "tracked point pinned at the repulsion floor "
                            "without a declared absorbing event")
            if self.z.shape[1]:
                gap_z = np.abs(z_before - w_old)
                self.zp[todo] = self.zp[todo] * gap_z / np.sqrt(
                    gap_z ** 2 + 4.0 * h[:, None])
            if self.mk.shape[1]:
                col = (np.abs(self.mk[todo] - w_new[:, None])
                       <= 1.001 * cfg.gap_floor)
                self.mk_done[todo] = self.mk_done[todo] | col
            self.w[todo] = w_new
            self.t[todo] = self.t[todo] + h


def _run_paths(config, seed, n_paths):
    """Simulate n_paths drivers, recording on the decimated base grid."""
    n_grid = int(round(config.T / config.dt))
    rec_idx = list(range(0, n_grid + 1, config.record_every))
    if rec_idx[-1] != n_grid:
        rec_idx.append(n_grid)
    ens = _PathEnsemble(config, seed, n_paths)
    times = np.array([k * config.dt for k in rec_idx])
    w = np.empty((n_paths, len(rec_idx)))
    forces = np.empty((n_paths, len(rec_idx), ens.g.shape[1]))
    z_tr = np.empty((n_paths, len(rec_idx), ens.z.shape[1]))
    z_gp = np.empty((n_paths, len(rec_idx), ens.z.shape[1]))
    mk_tr = np.empty((n_paths, len(rec_idx), ens.mk.shape[1]))
    out = 0
    for k in range(n_grid + 1):
        if k > 0:
            ens.advance_to(k * config.dt)
        if k == rec_idx[out]:
            w[:, out] = ens.w
            forces[:, out] = ens.g
            z_tr[:, out] = ens.z
            z_gp[:, out] = ens.zp
            mk_tr[:, out] = ens.mk
            out += 1
        if not np.any(ens.active):
            # freeze the remaining grid at the final state
            for rest in range(out, len(rec_idx)):
                w[:, rest] = ens.w
                forces[:, rest] = ens.g
                z_tr[:, rest] = ens.z
                z_gp[:, rest] = ens.zp
                mk_tr[:, rest] = ens.mk
            break
    records = []
    for i in range(n_paths):
        records.append(DrivingRecord(
            config=config,
            times=times,
            w=w[i],
            forces=forces[i],
            z_tracks=z_tr[i],
            z_gprime=z_gp[i],
            marker_tracks=mk_tr[i],
            marker_swallowed=ens.mk_done[i].copy(),
            min_gap=float(ens.min_gap[i]),
            absorbed=bool(ens.absorbed[i]),
            absorption_time=float(ens.absorption_time[i]),
            repulsion_events=int(ens.repulsions[i]),
        ))
    return records


def simulate_sle(config: SleConfig, seed) -> DrivingRecord:
    """One driving-function path under the configured SDE."""
    return _run_paths(config, seed, 1)[0]


def simulate_ensemble(config: SleConfig, seed, n_paths) -> list:
    """Independent paths advanced in lockstep (one RNG stream per batch)."""
    return _run_paths(config, seed, n_paths)


# ---------------------------------------------------------------------------
# trace reconstruction and driving extraction


def _inverse_slit_step(p, u, cap):
    """Pull points back through one vertical-slit map of capacity cap."""
    d = (p - u) ** 2 - 4.0 * cap
    s = np.sqrt(d.astype(np.complex128))
    s = np.where(s.imag < 0.0, -s, s)
    real_line = np.abs(s.imag) < 1e-300
    wrong = real_line & ((s.real >= 0.0) != ((p - u).real >= 0.0))
    s = np.where(wrong, -s, s)
    return u + s


def trace_from_driving(rec: DrivingRecord) -> np.ndarray:
    """Curve points at the recorded times by backward slit composition."""
    t = rec.times
    wv = rec.w
    n = len(t)
    tips = wv.astype(np.complex128).copy()
    for i in range(n - 1, 0, -1):
        cap = t[i] - t[i - 1]  # slit parameter: g(z) = z + 2*cap/z + ...
        u = 0.5 * (wv[i] + wv[i - 1])
        tips[i:] = _inverse_slit_step(tips[i:], u, cap)
    tips[0] = complex(wv[0], 0.0)
    return tips


def extract_driving(points, min_height=1e-9) -> DrivingRecord:
    """Vertical-slit zipper: capacity-parametrized driving of a curve.

    points is a polyline in the closed upper half-plane starting on the
    real axis.  Each vertex is welded by the slit map centered at its
    current image; a non-initial vertex mapped onto the real axis within
    min_height (relative to the curve scale) means the discretized curve
    touches itself or the boundary.
    """
    p = np.asarray(points, dtype=np.complex128).copy()
    if len(p) < 2:
        raise SelfTouchTolerance("need at least two curve points")
    scale = max(float(np.max(np.abs(p))), 1.0)
    if abs(p[0].imag) > 1e-6 * scale:
        raise SelfTouchTolerance("curve must start on the real axis")
    times = [0.0]
    w = [float(p[0].real)]
    t = 0.0
    for k in range(1, len(p)):
        tip = p[k]
        y = tip.imag
        if y <= min_height * scale:
            raise SelfTouchTolerance(
                f"curve point {k} collapsed onto the boundary")
        u = float(tip.real)
        cap = 0.25 * y * y  # hcap of a vertical slit of height y is y^2/4
        if k + 1 < len(p):
            d = (p[k + 1:] - u) ** 2 + 4.0 * cap
            s = np.sqrt(d)
            s = np.where(s.imag < 0.0, -s, s)
            real_line = np.abs(s.imag) < 1e-300
            wrong = real_line & ((s.real >= 0.0)
                                 != ((p[k + 1:] - u).real >= 0.0))
            s = np.where(wrong, -s, s)
            p[k + 1:] = u + s
        t += cap
        times.append(t)
        w.append(u)
    empty = np.empty((len(times), 0))
    return DrivingRecord(
        config=None,
        times=np.array(times),
        w=np.array(w),
        forces=empty,
        z_tracks=empty,
        z_gprime=empty,
        marker_tracks=empty,
        marker_swallowed=np.empty(0, dtype=bool),
        min_gap=float("inf"),
        absorbed=False,
        absorption_time=float("nan"),
    )


def qv_estimate(rec: DrivingRecord) -> float:
    """kappa estimate: quadratic variation of W over elapsed capacity time."""
    span = float(rec.times[-1] - rec.times[0])
    if span <= 0.0:
        raise DomainError("record spans zero capacity time")
    return float(np.sum(np.diff(rec.w) ** 2) / span)


def drift_regression(records, gap_cut=None) -> np.ndarray:
    """Least-squares weights of the 1/(W - g_i) drift basis.

    Regresses driving increments on the force-point drift columns across
    an ensemble of records; for SLE_kappa(rho) drivers the coefficients
    recover the weight vector rho.  Increments taken while some gap is
    below gap_cut are discarded: near a touch the integrator regularizes
    the drift, so those rows are not informative about the weights.
    """
    rows = []
    rhs = []
    for rec in records:
        if rec.forces.shape[1] == 0:
            continue
        if gap_cut is None:
            kappa = rec.config.kappa if rec.config is not None else 1.0
            base_dt = float(np.median(np.diff(rec.times)))
            cut = 10.0 * math.sqrt(kappa * base_dt)
        else:
            cut = gap_cut
        dt = np.diff(rec.times)
        gaps = np.abs(rec.w[:-1, None] - rec.forces[:-1])
        keep = (dt > 0) & (np.min(gaps, axis=1) > cut)
        basis = 1.0 / (rec.w[:-1, None] - rec.forces[:-1])
        rows.append(basis[keep] * dt[keep, None])
        rhs.append(np.diff(rec.w)[keep])
    if not rows:
        raise DomainError("no force points to regress against")
    X = np.concatenate(rows)
    Y = np.concatenate(rhs)
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef


# ---------------------------------------------------------------------------
# martingale diagnostics


def hsle8_martingale_path(rec: DrivingRecord, d=None, a=None) -> np.ndarray:
    """The sqrt-times-hypergeometric-ratio martingale along a record.

    d, a default to the initial positions of the two tracked marked
    points.  Degenerate configurations (a -> d) push the hypergeometric
    argument to 1 and raise DomainError.
    """
    if rec.forces.shape[1] < 2:
        raise DomainError("record does not track the two marked points")
    gd = rec.forces[:, 0]
    ga = rec.forces[:, 1]
    d0 = float(gd[0]) if d is None else float(d)
    a0 = float(ga[0]) if a is None else float(a)
    w0 = float(rec.w[0])
    m0 = (d0 - w0) / (a0 - w0)
    f0 = elliptic_2f1(m0)
    out = np.empty(len(rec.times))
    for k in range(len(rec.times)):
        m = (gd[k] - rec.w[k]) / (ga[k] - rec.w[k])
        out[k] = math.sqrt((ga[k] - rec.w[k]) / (a0 - w0)) \
            * f0 / elliptic_2f1(m)
    return out


def determinant_martingale_path(rec: DrivingRecord):
    """M_t of the slit-map reference flow along a recorded path.

    Evaluates the hitting-ratio determinant at every recorded time from
    the evolved marked points, the tracked branch points and their map
    derivatives.  Returns (times, values) up to the absorption time.
    """
    from .conformal import hij_matrix

    n = rec.forces.shape[1] // 2
    out_t, out_m = [], []
    for k in range(len(rec.times)):
        if rec.absorbed and rec.times[k] > rec.absorption_time:
            break
        y = rec.forces[k]
        tips = [rec.w[k]] + list(rec.z_tracks[k])
        gprime = [1.0] + list(rec.z_gprime[k])
        exclude = [-1] * (n - 1)
        _, m = hij_matrix(y, tips, exclude, gprime)
        out_t.append(rec.times[k])
        out_m.append(m)
    return np.array(out_t), np.array(out_m)


# ---------------------------------------------------------------------------
# conditioned decomposition (hypergeometric vs SLE_8(2,2,-4))


@dataclass
class DecompositionEnsembles:
    """Paired ensembles for the conditioned-decomposition comparison."""

    hit_positions: np.ndarray
    tau_conditioned: np.ndarray
    midpoint_conditioned: np.ndarray
    tau_decomposed: np.ndarray
    midpoint_decomposed: np.ndarray
    acceptance_rate: float
    window: tuple


def _truncate_record(rec, idx):
    return DrivingRecord(
        config=rec.config, times=rec.times[: idx + 1], w=rec.w[: idx + 1],
        forces=rec.forces[: idx + 1], z_tracks=rec.z_tracks[: idx + 1],
        z_gprime=rec.z_gprime[: idx + 1],
        marker_tracks=rec.marker_tracks[: idx + 1],
        marker_swallowed=rec.marker_swallowed, min_gap=rec.min_gap,
        absorbed=rec.absorbed, absorption_time=rec.absorption_time)


def pinch_functionals(rec, marker_positions):
    """Stopped-path functionals of an absorbed record.

    Returns (tau, pinch position, midpoint real part) where tau is the
    first-passage time of the absorbing gap to the floor, the pinch
    position is where the final marker-gap profile leaves the collapsed
    plateau (one decade above the floor: marker images crowd toward the
    driver far beyond the pinch point, so shallower crossing levels read
    systematically high), and the midpoint is the real part of the
    reconstructed trace at half the stopped capacity.  Returns None for
    a non-absorbed path or a profile with no crossing.
    """
    if not rec.absorbed:
        return None
    level = math.log10(rec.config.gap_floor) + 1.0
    prof = np.log10(np.abs(rec.marker_tracks[-1] - rec.w[-1]))
    above = np.flatnonzero(prof > level)
    if above.size == 0 or above[0] == 0:
        return None
    j = int(above[0])
    x = marker_positions
    pos = x[j - 1] + (x[j] - x[j - 1]) * (level - prof[j - 1]) \
        / (prof[j] - prof[j - 1])
    grid = rec.times <= rec.absorption_time
    idx = int(np.flatnonzero(grid)[-1]) if grid.any() else 0
    tips = trace_from_driving(_truncate_record(rec, idx))
    mid = tips[max(1, idx // 2)]
    return float(rec.absorption_time), float(pos), float(mid.real)


def _decomposition_markers(d_pos, a_pos, lo, hi):
    far = hi if math.isfinite(hi) else lo + 2.0 * (lo - a_pos) + 1.0
    span = max(4.0 * (far - a_pos), 2.0 * (a_pos - d_pos)) + 1.0
    step = min(0.05, max(0.005, 0.2 * (hi - lo))) if math.isfinite(hi) \
        else 0.05
    fine = np.arange(a_pos + step, far + 1.0, step)
    coarse = np.arange(far + 1.0, a_pos + span, 0.5)
    return tuple(np.concatenate([fine, coarse]))


def simulate_conditioned_decomposition(quad, window, seed, n_paths=200,
                                       dt=2e-3, T=40.0, gap_floor=1e-8,
                                       max_attempts=None):
    """Window-conditioned hypergeometric paths vs the decomposed SDE.

    quad = (d, a) are the marked points of the hypergeometric SLE_8
    started at 0 (the fourth point is at infinity); window = (lo, hi) is a
    sub-interval of (a, infinity), hi may be inf.  Ensemble A keeps
    hypergeometric paths stopped at the first-passage of the image gap of
    a to the gap floor whose pinch position falls in the window; ensemble
    B runs SLE_8(2,2,-4) with the extra force point at the window center
    (the median accepted position when hi is infinite) and keeps paths by
    the same stopping rule and window filter.  The stopped functionals
    (first-passage capacity, pinch position, trace midpoint) are
    identical measurable functions of the curve in both ensembles, so
    their discretization bias is common and cancels in two-sample
    comparisons; paths not stopped by capacity T are dropped on both
    sides.
    """
    d_pos, a_pos = map(float, quad)
    lo, hi = map(float, window)
    if not 0.0 < d_pos < a_pos or not a_pos <= lo < hi:
        raise ConfigError("window must be a sub-interval of (a, infinity)")
    if max_attempts is None:
        max_attempts = 50 * n_paths
    markers = _decomposition_markers(d_pos, a_pos, lo, hi)
    mkx = np.array(markers)
    common = dict(kappa=8.0, T=T, dt=dt, w0=0.0, markers=markers,
                  absorb_on_collision=True, absorbing_tracks=(1,),
                  gap_floor=gap_floor, gap_safety=0.05, record_every=4)
    cfg_a = SleConfig(force_points=((d_pos, 2.0), (a_pos, 2.0)),
                      drift_kind="hypergeometric", **common)
    rng_seq = np.random.SeedSequence(seed)
    seeds = rng_seq.generate_state(4096, dtype=np.uint64)
    accepted, taus_a, mids_a = [], [], []
    attempts = 0
    batch = min(max(256, n_paths), max_attempts)
    si = 0
    while len(accepted) < n_paths:
        if attempts >= max_attempts:
            raise RejectionBudgetExceeded(
                "conditioning window too narrow",
                acceptance_rate=len(accepted) / max(attempts, 1))
        todo = min(batch, max_attempts - attempts)
        recs = simulate_ensemble(cfg_a, seeds[si], todo)
        si += 1
        attempts += todo
        for rec in recs:
            out = pinch_functionals(rec, mkx)
            if out is None:
                continue
            tau, pos, mid = out
            if lo <= pos <= hi:
                accepted.append(pos)
                taus_a.append(tau)
                mids_a.append(mid)
                if len(accepted) == n_paths:
                    break
    rate = len(accepted) / attempts
    # ensemble B dives onto the window center; for narrow windows the
    # conditioned law is well approximated by the center's decomposition
    if math.isfinite(hi):
        z0 = 0.5 * (lo + hi)
    elif accepted:
        z0 = float(np.median(accepted))
    else:
        z0 = lo + 1.0
    cfg_b = SleConfig(
        force_points=((d_pos, 2.0), (a_pos, 2.0), (float(z0), -4.0)),
        drift_kind="linear", **common)
    taus_b, mids_b = [], []
    bi = 0
    while len(taus_b) < n_paths and bi < 40:
        recs = simulate_ensemble(cfg_b, seeds[(si + bi) % len(seeds)], batch)
        bi += 1
        for rec in recs:
            out = pinch_functionals(rec, mkx)
            if out is None:
                continue
            tau, pos, mid = out
            if lo <= pos <= hi:
                taus_b.append(tau)
                mids_b.append(mid)
                if len(taus_b) == n_paths:
                    break
    return DecompositionEnsembles(
        hit_positions=np.array(accepted),
        tau_conditioned=np.array(taus_a),
        midpoint_conditioned=np.array(mids_a),
        tau_decomposed=np.array(taus_b),
        midpoint_decomposed=np.array(mids_b),
        acceptance_rate=rate,
        window=(lo, hi),
    )
