"""Time integrators for the tangent-angle evolution
theta_t = (2*pi/L)^3 [theta_aaa + theta_a^3 / 2] in Fourier space.

Three non-stiff schemes are provided:

* ``adb``   -- integrating-factor Euler start, then two-step
  Adams-Bashforth; the stiff linear term is propagated exactly by the
  unimodular multiplier zeta_m = exp(-i dt (2 pi m / L)^3).
* ``cn``    -- explicit Euler start, then a leapfrog update with the
  linear term treated Crank-Nicolson style across the j-1/j+1 levels.
* ``cnadb`` -- the cn scheme with its first step replaced by the average
  of the adb and cn first steps.

All updates act on the modes of phi = theta - alpha: the alpha-linear
part of theta is not periodic, has the same linear symbol for every mode
it shares with phi, and enters the dynamics only through
theta_alpha = 1 + phi_alpha inside the nonlinear term.  The nonlinear
term is evaluated pointwise in physical space.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import BlowUp, MissingHistory, NonCommensurateTime, NonFiniteField
from .geometry import ThetaLState
from .spectral import (
    GridField,
    Spectrum,
    _check_grid_size,
    _filtered_derivative_values,
    apply_mode_filter,
    wavenumbers,
)

SCHEMES = ("adb", "cn", "cnadb")
FILTERS = ("none", "dpr", "krasny", "both")

# provider of the physical-space nonlinear term; injectable for testing
NonlinearProvider = Callable[[ThetaLState], GridField]


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selection, step size, mode filter, and grid size for a run."""

    scheme: str
    dt: float
    n: int
    filter: str = "none"
    blowup_limit: float = 1e3  # diagnostic guard on max|phi|, not physics

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        _check_grid_size(self.n)


@dataclass(frozen=True)
class SchemeMemory:
    """Per-scheme history carried between steps.

    ``prev_nl`` holds the previous nonlinear spectrum (adb only);
    ``prev_theta`` holds the phi spectrum one level back (cn/cnadb only).
    """

    step_count: int
    prev_nl: Optional[Spectrum] = None
    prev_theta: Optional[Spectrum] = None


@dataclass(frozen=True)
class Multipliers:
    """Per-mode update factors; constant along a trajectory since L is.

    zeta  = exp(-i gamma)            |zeta| = 1
    zeta1 = (1 - i gamma)/(1 + i gamma)   |zeta1| = 1
    zeta2 = (1 - i gamma)/(1 + gamma^2)   |zeta2| <= 1
    with gamma_m = dt (2 pi m / L)^3.  The Nyquist gamma is zeroed: the
    third-derivative symbol is odd and carries no information there on a
    real grid, and a real multiplier keeps phi real.
    """

    gamma: np.ndarray
    zeta: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray


@lru_cache(maxsize=64)
def modal_multipliers(n: int, dt: float, length: float) -> Multipliers:
    """Update factors for all modes in FFT-natural order."""
    m = wavenumbers(n).astype(np.float64).copy()
    m[n // 2] = 0.0
    gamma = dt * (2.0 * np.pi * m / length) ** 3
    zeta = np.exp(-1j * gamma)
    zeta1 = (1.0 - 1j * gamma) / (1.0 + 1j * gamma)
    zeta2 = (1.0 - 1j * gamma) / (1.0 + gamma**2)
    for arr in (gamma, zeta, zeta1, zeta2):
        arr.setflags(write=False)
    return Multipliers(gamma=gamma, zeta=zeta, zeta1=zeta1, zeta2=zeta2)


def nonlinear_term(state: ThetaLState, filter: str = "none") -> GridField:
    """Physical-space nonlinear term (2*pi/L)^3 (1 + D phi)^3 / 2.

    D is the first derivative with the configured mode filter; the
    solution itself is never filtered.
    """
    theta_a = 1.0 + _filtered_derivative_values(state.phi.values, filter)
    return GridField((2.0 * np.pi / state.length) ** 3 * theta_a**3 / 2.0)


def _nl_hat(state, cfg, nonlinear) -> np.ndarray:
    """Spectrum of the nonlinear term, with the configured mode filter.

    The filter acts twice: on the derivative inside the term and on the
    term's own spectrum.  The cubic regenerates (aliased) content beyond
    the filtered band, so damping only the derivative leaves an undamped
    feedback loop at the filter edge that destabilizes the adb scheme.
    """
    nl = nonlinear(state) if nonlinear is not None else nonlinear_term(state, cfg.filter)
    return apply_mode_filter(np.fft.fft(nl.values) / state.n, cfg.filter)


def _phi_hat(state) -> np.ndarray:
    return np.fft.fft(state.phi.values) / state.n


def _advance(state, new_hat, dt) -> ThetaLState:
    phi = (np.fft.ifft(new_hat) * state.n).real
    return replace(state, phi=GridField(phi), time=state.time + dt)


def _check_cfg(state, cfg):
    if state.n != cfg.n:
        raise ValueError(f"state grid size {state.n} does not match config n={cfg.n}")


def adb_init_step(
    state: ThetaLState, cfg: SchemeConfig, nonlinear: Optional[NonlinearProvider] = None
) -> tuple[ThetaLState, SchemeMemory]:
    """Integrating-factor Euler start: phi^1 = zeta (phi^0 + dt NL^0) per mode."""
    _check_cfg(state, cfg)
    mult = modal_multipliers(cfg.n, cfg.dt, state.length)
    nl_hat = _nl_hat(state, cfg, nonlinear)
    new_hat = mult.zeta * (_phi_hat(state) + cfg.dt * nl_hat)
    new_state = _advance(state, new_hat, cfg.dt)
    return new_state, SchemeMemory(step_count=1, prev_nl=Spectrum(nl_hat))


def adb_step(
    state: ThetaLState,
    memory: SchemeMemory,
    cfg: SchemeConfig,
    nonlinear: Optional[NonlinearProvider] = None,
) -> tuple[ThetaLState, SchemeMemory]:
    """Adams-Bashforth step with exact linear propagation:

    phi^{j+1} = zeta phi^j + (dt/2) [3 zeta NL^j - zeta^2 NL^{j-1}].
    """
    _check_cfg(state, cfg)
    if memory.prev_nl is None:
        raise MissingHistory("adb_step needs the previous nonlinear spectrum")
    mult = modal_multipliers(cfg.n, cfg.dt, state.length)
    nl_hat = _nl_hat(state, cfg, nonlinear)
    new_hat = mult.zeta * _phi_hat(state) + 0.5 * cfg.dt * (
        3.0 * mult.zeta * nl_hat - mult.zeta**2 * memory.prev_nl.coeffs
    )
    new_state = _advance(state, new_hat, cfg.dt)
    return new_state, SchemeMemory(step_count=memory.step_count + 1, prev_nl=Spectrum(nl_hat))


def cn_init_step(
    state: ThetaLState, cfg: SchemeConfig, nonlinear: Optional[NonlinearProvider] = None
) -> tuple[ThetaLState, SchemeMemory]:
    """Explicit Euler start: phi^1 = (1 - i gamma) phi^0 + dt NL^0 per mode."""
    _check_cfg(state, cfg)
    mult = modal_multipliers(cfg.n, cfg.dt, state.length)
    phi_hat = _phi_hat(state)
    nl_hat = _nl_hat(state, cfg, nonlinear)
    new_hat = (1.0 - 1j * mult.gamma) * phi_hat + cfg.dt * nl_hat
    new_state = _advance(state, new_hat, cfg.dt)
    return new_state, SchemeMemory(step_count=1, prev_theta=Spectrum(phi_hat))


def cn_step(
    state: ThetaLState,
    memory: SchemeMemory,
    cfg: SchemeConfig,
    nonlinear: Optional[NonlinearProvider] = None,
) -> tuple[ThetaLState, SchemeMemory]:
    """Leapfrog Crank-Nicolson step:

    phi^{j+1} = zeta1 phi^{j-1} + 2 dt zeta2 NL^j,

    coupling levels j+1 and j-1 with the nonlinear term at the middle
    level.  The pre-update phi^j becomes the new history level.
    """
    _check_cfg(state, cfg)
    if memory.prev_theta is None:
        raise MissingHistory("cn_step needs the phi spectrum one level back")
    mult = modal_multipliers(cfg.n, cfg.dt, state.length)
    phi_hat = _phi_hat(state)
    nl_hat = _nl_hat(state, cfg, nonlinear)
    new_hat = mult.zeta1 * memory.prev_theta.coeffs + 2.0 * cfg.dt * mult.zeta2 * nl_hat
    new_state = _advance(state, new_hat, cfg.dt)
    return new_state, SchemeMemory(step_count=memory.step_count + 1, prev_theta=Spectrum(phi_hat))


def cnadb_init_step(
    state: ThetaLState, cfg: SchemeConfig, nonlinear: Optional[NonlinearProvider] = None
) -> tuple[ThetaLState, SchemeMemory]:
    """First step averaging the adb and cn starts per mode:

    phi^1 = phi^0 (1/2)[e^{-i gamma} + (1 - i gamma)]
            + NL^0 (dt/2)[1 + e^{-i gamma}].

    Subsequent steps use :func:`cn_step`.
    """
    _check_cfg(state, cfg)
    mult = modal_multipliers(cfg.n, cfg.dt, state.length)
    phi_hat = _phi_hat(state)
    nl_hat = _nl_hat(state, cfg, nonlinear)
    new_hat = phi_hat * 0.5 * (mult.zeta + 1.0 - 1j * mult.gamma) + nl_hat * (
        0.5 * cfg.dt
    ) * (1.0 + mult.zeta)
    new_state = _advance(state, new_hat, cfg.dt)
    return new_state, SchemeMemory(step_count=1, prev_theta=Spectrum(phi_hat))


_INIT_STEPS = {"adb": adb_init_step, "cn": cn_init_step, "cnadb": cnadb_init_step}
_STEPS = {"adb": adb_step, "cn": cn_step, "cnadb": cn_step}


def init_step(state, cfg, nonlinear=None):
    """Dispatch the scheme's first step."""
    return _INIT_STEPS[cfg.scheme](state, cfg, nonlinear)


def step(state, memory, cfg, nonlinear=None):
    """Dispatch a subsequent step of the scheme."""
    return _STEPS[cfg.scheme](state, memory, cfg, nonlinear)


def integrate(
    initial: ThetaLState,
    cfg: SchemeConfig,
    t_final: float,
    observers=(),
    nonlinear: Optional[NonlinearProvider] = None,
) -> ThetaLState:
    """Advance the state from its current time to t_final.

    ``t_final - initial.time`` must be an integer multiple of dt (no
    partial final step: it would break the multistep error structure).
    ``observers`` is an iterable of (stride, callback) pairs; each
    callback(step_index, state) fires at step 0, every ``stride`` steps,
    and at the final step.  Raises :class:`BlowUp` if the solution goes
    non-finite or max|phi| exceeds the configured guard.
    """
    elapsed = t_final - initial.time
    if elapsed < 0:
        raise NonCommensurateTime(f"t_final {t_final} precedes state time {initial.time}")
    ratio = elapsed / cfg.dt
    steps = int(round(ratio))
    if abs(ratio - steps) > 1e-9 * max(1.0, abs(ratio)):
        raise NonCommensurateTime(
            f"t_final - t0 = {elapsed!r} is not an integer multiple of dt = {cfg.dt!r}"
        )
    observers = tuple(observers)

    def notify(j, state):
        for stride, callback in observers:
            if j == 0 or j == steps or j % stride == 0:
                callback(j, state)

    state = initial
    notify(0, state)
    memory = None
    t0 = initial.time
    for j in range(1, steps + 1):
        try:
            if memory is None:
                state, memory = init_step(state, cfg, nonlinear)
            else:
                state, memory = step(state, memory, cfg, nonlinear)
        except NonFiniteField as exc:
            raise BlowUp(j, t0 + j * cfg.dt, str(exc)) from exc
        state = replace(state, time=t0 + j * cfg.dt)
        peak = float(np.max(np.abs(state.phi.values)))
        if not peak <= cfg.blowup_limit:
            raise BlowUp(j, state.time, f"max|phi| = {peak:.3e} exceeds {cfg.blowup_limit:.3e}")
        notify(j, state)
    return state
