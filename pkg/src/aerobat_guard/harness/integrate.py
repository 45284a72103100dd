"""Generic RK4 step and integer-tick simulation clock."""
import numpy as np

from aerobat_guard.spatial import reorthonormalize


class NonFiniteStateError(FloatingPointError):
    """Raised when an integration step produces NaN/inf; carries the offending state."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = np.array(state, copy=True)


def rk4_step(f, x, dt, t=0.0, rotation_slices=()):
    """One classical RK4 step of ``x' = f(t, x)``.

    Args:
        f: derivative ``f(t, x) -> array``.
        x: state vector.
        dt: step (> 0).
        t: time at the start of the step.
        rotation_slices: slices of ``x`` holding row-major 3x3 rotations,
            reprojected onto SO(3) after the step.

    Raises:
        NonFiniteStateError: if a stage derivative or the result is not finite.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    ks = []
    for c, xs in ((0.0, None), (0.5, 0), (0.5, 1), (1.0, 2)):
        xi = x if xs is None else x + (c * dt) * ks[xs]
        k = np.asarray(f(t + c * dt, xi), dtype=float)
        if not np.all(np.isfinite(k)):
            raise NonFiniteStateError(f"non-finite derivative at t={t + c * dt!r}; state={xi.tolist()}", xi)
        ks.append(k)
    out = x + dt / 6.0 * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3])
    for sl in rotation_slices:
        out[sl] = reorthonormalize(out[sl].reshape(3, 3)).ravel()
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError(f"non-finite state after step at t={t!r}", out)
    return out


class SimClock:
    """Time as an integer count of base ticks; ``t = tick * dt`` exactly."""

    def __init__(self, dt, periods):
        self.dt = float(dt)
        self.periods = dict(periods)
        self.tick = 0
        self.counts = {k: 0 for k in self.periods}

    @property
    def t(self):
        return self.tick * self.dt

    def due(self, name):
        return self.tick % self.periods[name] == 0

    def fire(self, name):
        """True (and counted) when ``name`` is due at the current tick."""
        if self.due(name):
            self.counts[name] += 1
            return True
        return False

    def next_tick(self, name):
        p = self.periods[name]
        return (self.tick // p + 1) * p

    def advance_to(self, tick):
        if tick < self.tick:
            raise ValueError("clock cannot run backwards")
        self.tick = int(tick)
