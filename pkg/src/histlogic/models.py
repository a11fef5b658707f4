"""Built-in scenarios: a spin measurement, a spin between two measuring devices, and a double slit.

Each builder returns a :class:`NamedModel` holding the Hilbert space layout,
the time grid and dynamics, named projectors on the full space, and the
families of histories used to reason about the scenario.  Family generators
are named ``"<symbol>@<time label>"``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from . import linalg
from .errors import NonUnitaryStep
from .histories import (
    HistoryFamily,
    PropagatorSet,
    SimpleHistory,
    TimeGrid,
    build_family,
    propagators_explicit,
    simple_history,
)

SPIN_DIM = 2
DEVICE_DIM = 3  # ready, plus, minus
READY, PLUS, MINUS = 0, 1, 2


@dataclass(frozen=True, eq=False)
class NamedModel:
    name: str
    dims: tuple[int, ...]
    factor_names: tuple[str, ...]
    grid: TimeGrid
    propagators: PropagatorSet
    symbols: Mapping[str, np.ndarray] = field(repr=False)
    states: Mapping[str, np.ndarray] = field(repr=False)
    families: Mapping[str, HistoryFamily] = field(repr=False)
    params: Mapping[str, float | int | str] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def history(self, events: Mapping[str, str]) -> SimpleHistory:
        """Simple history from ``{time label: symbol name}``."""
        return simple_history(self.grid, {t: self.symbols[s] for t, s in events.items()}, self.dim)

    def family(self, name: str) -> HistoryFamily:
        return self.families[name]


def _ket(v) -> np.ndarray:
    return np.asarray(v, dtype=np.complex128)


def _proj(v) -> np.ndarray:
    v = _ket(v)
    return np.outer(v, np.conjugate(v))


def _generators(model_symbols: Mapping[str, np.ndarray], grid: TimeGrid, dim: int,
                events: Sequence[tuple[str, str]]) -> dict[str, SimpleHistory]:
    return {f"{s}@{t}": simple_history(grid, {t: model_symbols[s]}, dim) for s, t in events}


def measurement_unitary(basis: Sequence[np.ndarray], alternate: bool = False) -> np.ndarray:
    """Unitary on spin ⊗ device recording which vector of ``basis`` the spin is in.

    ``|b_k, ready> -> |b_k, pointer_k>`` with the spin left unchanged.  The rest
    of the map is completed so that each pointer value can only be reached
    from the matching spin value; ``alternate`` picks a second completion with
    the same property (extra phases and a rotation inside the ready sector).
    """
    b0, b1 = (_ket(b) for b in basis)
    dev = [linalg.basis_vector(DEVICE_DIM, i) for i in range(DEVICE_DIM)]

    def k(spin, ptr):
        return np.kron(spin, dev[ptr])

    pairs = [
        (k(b0, READY), k(b0, PLUS)),
        (k(b1, READY), k(b1, MINUS)),
        (k(b0, PLUS), k(b1, PLUS)),
        (k(b1, PLUS), k(b0, MINUS)),
    ]
    leftover_src = [k(b0, MINUS), k(b1, MINUS)]
    leftover_dst = [k(b0, READY), k(b1, READY)]
    if alternate:
        pairs[2] = (pairs[2][0], np.exp(0.7j) * pairs[2][1])
        pairs[3] = (pairs[3][0], np.exp(-1.3j) * pairs[3][1])
        c, s = math.cos(0.4), math.sin(0.4)
        leftover_dst = [c * leftover_dst[0] + s * leftover_dst[1], -s * leftover_dst[0] + c * leftover_dst[1]]
    pairs += list(zip(leftover_src, leftover_dst))
    return linalg.complete_unitary(pairs, SPIN_DIM * DEVICE_DIM)


def _spin_states() -> dict[str, np.ndarray]:
    alpha = _ket([1, 0])
    beta = _ket([0, 1])
    return {
        "alpha": alpha,
        "beta": beta,
        "gamma": (alpha + beta) / math.sqrt(2),
        "delta": (alpha - beta) / math.sqrt(2),
    }


# -- spin measurement --------------------------------------------------------

def build_spin_measurement_model(alternate_completion: bool = False, eps: float | None = None,
                                 eps_consistency: float = 1e-8) -> NamedModel:
    """Spin-1/2 particle and a three-state apparatus measuring ``S_x``.

    Times ``t1 < t1.5 < t2``; nothing happens between ``t1`` and ``t1.5`` and
    the measurement takes place between ``t1.5`` and ``t2``.
    """
    dims = (SPIN_DIM, DEVICE_DIM)
    dim = SPIN_DIM * DEVICE_DIM
    spin = _spin_states()
    dev = {"X": READY, "X+": PLUS, "X-": MINUS}
    grid = TimeGrid((1.0, 1.5, 2.0), ("t1", "t1.5", "t2"))
    u = measurement_unitary([spin["alpha"], spin["beta"]], alternate_completion)
    props = propagators_explicit(grid, [linalg.identity(dim), u], eps)

    symbols: dict[str, np.ndarray] = {}
    states: dict[str, np.ndarray] = {}
    for name, v in spin.items():
        states[name] = v
        symbols[name] = linalg.embed(_proj(v), [0], dims)
    for name, i in dev.items():
        states[name] = linalg.basis_vector(DEVICE_DIM, i)
        symbols[name] = linalg.embed(_proj(states[name]), [1], dims)
    g = u @ np.kron(spin["gamma"], linalg.basis_vector(DEVICE_DIM, READY))
    states["G"] = g
    symbols["G"] = _proj(g)

    base_t1 = [("gamma", "t1"), ("delta", "t1"), ("X", "t1")]
    pointers = [("X+", "t2"), ("X-", "t2")]
    layouts = {
        "F1": [("alpha", "t1"), ("beta", "t1"), ("X", "t1")] + pointers,
        "F2": base_t1 + pointers,
        "F3": base_t1 + [("G", "t2")],
        "F4": base_t1 + [("alpha", "t1.5"), ("beta", "t1.5")] + pointers,
    }
    families = {
        name: build_family(props, _generators(symbols, grid, dim, ev), eps, eps_consistency, name=name)
        for name, ev in layouts.items()
    }
    return NamedModel("spin-measurement", dims, ("spin", "apparatus"), grid, props,
                      MappingProxyType(symbols), MappingProxyType(states), MappingProxyType(families),
                      MappingProxyType({"alternate_completion": int(alternate_completion)}))


# -- spin between two devices ------------------------------------------------

def build_two_device_model(third_device: str = "none", eps: float | None = None,
                           eps_consistency: float = 1e-8) -> NamedModel:
    """Spin passing an ``S_x`` device (between t1 and t2) then an ``S_z`` device (between t2.5 and t3).

    ``third_device`` is ``"none"``, ``"x"`` or ``"z"``; a third device of that
    kind with its own pointer ``W`` then acts between ``t2`` and ``t2.5``.
    """
    if third_device not in ("none", "x", "z"):
        raise ValueError("third_device must be 'none', 'x' or 'z'")
    spin = _spin_states()
    extra = third_device != "none"
    dims = (SPIN_DIM, DEVICE_DIM, DEVICE_DIM) + ((DEVICE_DIM,) if extra else ())
    names = ("spin", "x-device", "z-device") + (("third-device",) if extra else ())
    dim = int(np.prod(dims))
    grid = TimeGrid((1.0, 2.0, 2.5, 3.0), ("t1", "t2", "t2.5", "t3"))

    ux = measurement_unitary([spin["alpha"], spin["beta"]])
    uz = measurement_unitary([spin["gamma"], spin["delta"]])
    step1 = linalg.embed(ux, [0, 1], dims)
    step3 = linalg.embed(uz, [0, 2], dims)
    if third_device == "x":
        step2 = linalg.embed(ux, [0, 3], dims)
    elif third_device == "z":
        step2 = linalg.embed(uz, [0, 3], dims)
    else:
        step2 = linalg.identity(dim)
    props = propagators_explicit(grid, [step1, step2, step3], eps)

    symbols: dict[str, np.ndarray] = {}
    states: dict[str, np.ndarray] = dict(spin)
    for name, v in spin.items():
        symbols[name] = linalg.embed(_proj(v), [0], dims)
    pointer_factors = {"X": 1, "Z": 2} | ({"W": 3} if extra else {})
    for letter, factor in pointer_factors.items():
        for suffix, i in (("", READY), ("+", PLUS), ("-", MINUS)):
            states[letter + suffix] = linalg.basis_vector(DEVICE_DIM, i)
            symbols[letter + suffix] = linalg.embed(_proj(states[letter + suffix]), [factor], dims)
    for sx in "+-":
        for sz in "+-":
            symbols[f"X{sx}Z{sz}"] = symbols[f"X{sx}"] @ symbols[f"Z{sz}"]
    ready = [linalg.basis_vector(DEVICE_DIM, READY)] * (len(dims) - 1)
    psi1 = linalg.tensor(*([spin["gamma"][:, None]] + [r[:, None] for r in ready]))[:, 0]
    states["psi1"] = psi1
    symbols["psi1"] = _proj(psi1)

    f1 = [("psi1", "t1")] + [(f"X{a}Z{b}", "t3") for a in "+-" for b in "+-"]
    layouts = {
        "F1": f1,
        "F2": f1 + [("alpha", "t2"), ("beta", "t2")],
        "F3": f1 + [("gamma", "t2"), ("delta", "t2")],
        "F4": f1 + [("gamma", "t2"), ("delta", "t2"), ("gamma", "t2.5"), ("delta", "t2.5")],
    }
    families = {
        name: build_family(props, _generators(symbols, grid, dim, ev), eps, eps_consistency, name=name)
        for name, ev in layouts.items()
    }
    return NamedModel("two-device", dims, names, grid, props, MappingProxyType(symbols),
                      MappingProxyType(states), MappingProxyType(families),
                      MappingProxyType({"third_device": third_device}))


# -- double slit -------------------------------------------------------------

DEFAULT_DETECTORS = 4
DEFAULT_PHASE_A = 0.0
DEFAULT_PHASE_B = math.pi
DEFAULT_REFLECT = 1 / math.sqrt(3)
MAX_DETECTORS = 12


def slit_amplitudes(reflect_amp: float) -> tuple[float, float, float]:
    """Amplitudes ``(a, b, c)`` for slit A, slit B and reflection."""
    ab = math.sqrt((1 - reflect_amp ** 2) / 2)
    return ab, ab, reflect_amp


def detector_wave(num_detectors: int, phase: float) -> np.ndarray:
    """Amplitudes ``e^{i phase j} / sqrt(m)`` over detectors ``j = 1..m``."""
    j = np.arange(1, num_detectors + 1)
    return np.exp(1j * phase * j) / math.sqrt(num_detectors)


def build_double_slit_model(num_detectors: int = DEFAULT_DETECTORS, phase_A: float = DEFAULT_PHASE_A,
                            phase_B: float = DEFAULT_PHASE_B, reflect_amp: float = DEFAULT_REFLECT,
                            eps: float | None = None, eps_consistency: float = 1e-8) -> NamedModel:
    """Particle passing a two-slit screen towards ``m`` detectors.

    Basis: source, region behind slit A, region behind slit B, reflected, and
    ``fired_1 .. fired_m`` (detector ``j`` has registered the particle).
    """
    m = int(num_detectors)
    if not 2 <= m <= MAX_DETECTORS:
        raise ValueError(f"num_detectors must lie in 2..{MAX_DETECTORS}")
    if not 0 <= reflect_amp < 1:
        raise ValueError("reflect_amp must satisfy 0 <= reflect_amp < 1")
    dim = m + 4
    src, ra, rb, refl = (linalg.basis_vector(dim, i) for i in range(4))
    fired = [linalg.basis_vector(dim, 4 + j) for j in range(m)]
    a, b, c = slit_amplitudes(reflect_amp)
    grid = TimeGrid((1.0, 2.0, 3.0), ("t1", "t2", "t3"))

    u1 = linalg.complete_unitary([(src, a * ra + b * rb + c * refl)], dim)
    wave_a = sum(w * f for w, f in zip(detector_wave(m, phase_A), fired))
    wave_b = sum(w * f for w, f in zip(detector_wave(m, phase_B), fired))
    if abs(np.vdot(wave_a, wave_b)) > 1e-9:
        raise NonUnitaryStep("the two slit waves must reach the detectors in orthogonal states; "
                             "choose phase_B - phase_A = 2*pi*k/m with k not a multiple of m")
    u2 = linalg.complete_unitary([(ra, wave_a), (rb, wave_b), (refl, refl)], dim)
    props = propagators_explicit(grid, [u1, u2], eps)

    states = {"Psi1": src, "RA": ra, "RB": rb, "Refl": refl}
    symbols = {"Psi1": _proj(src), "PA": _proj(ra), "PB": _proj(rb), "Refl": _proj(refl)}
    symbols["P"] = symbols["PA"] + symbols["PB"]
    for j, f in enumerate(fired, start=1):
        states[f"D{j}"] = f
        symbols[f"D{j}"] = _proj(f)

    detectors = [(f"D{j}", "t3") for j in range(1, m + 1)]
    slits = [("PA", "t2"), ("PB", "t2")]
    layouts = {
        "F1": [("Psi1", "t1")] + detectors,
        "F2": [("Psi1", "t1"), ("P", "t2")] + detectors,
        "F3": [("Psi1", "t1")] + slits,
        "F2_slits": [("Psi1", "t1"), ("P", "t2")] + slits + detectors,
        "F3_detectors": [("Psi1", "t1")] + slits + detectors,
    }
    families = {
        name: build_family(props, _generators(symbols, grid, dim, ev), eps, eps_consistency, name=name)
        for name, ev in layouts.items()
    }
    params = {"num_detectors": m, "phase_A": float(phase_A), "phase_B": float(phase_B),
              "reflect_amp": float(reflect_amp)}
    return NamedModel("double-slit", (dim,), ("particle",), grid, props, MappingProxyType(symbols),
                      MappingProxyType(states), MappingProxyType(families), MappingProxyType(params))


def detector_distribution_oracle(num_detectors: int = DEFAULT_DETECTORS, phase_A: float = DEFAULT_PHASE_A,
                                 phase_B: float = DEFAULT_PHASE_B,
                                 reflect_amp: float = DEFAULT_REFLECT) -> np.ndarray:
    """``|a u_j + b v_j|^2`` per detector, straight from the amplitudes."""
    a, b, _ = slit_amplitudes(reflect_amp)
    amp = a * detector_wave(num_detectors, phase_A) + b * detector_wave(num_detectors, phase_B)
    return np.abs(amp) ** 2


BUILTIN_MODELS = {
    "spin-measurement": build_spin_measurement_model,
    "two-device": build_two_device_model,
    "double-slit": build_double_slit_model,
}
