"""Neutrally stable signal generators ``w' = S w``, ``d = Gamma w``.

Exosystems are kept in a block form: an orthogonal change of basis ``Z``
(identity for structured construction) and a list of invariant blocks,
each either a 1x1 zero block or a 2x2 rotation ``[[0, omega], [-omega, 0]]``.
This makes evaluation, and the time integral of ``w``, closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import AssumptionViolation, ScenarioError

__all__ = ["SignalSpec", "Exosystem", "build_structured", "build_raw",
           "evaluate", "from_dict"]

SKEW_TOL = 1e-12


@dataclass(frozen=True)
class SignalSpec:
    """One disturbance channel ``d(t) = offset + sum amp*sin(omega*t + phase)``."""

    offset: float = 0.0
    harmonics: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        omegas = [h[1] for h in self.harmonics]
        if len(set(omegas)) != len(omegas):
            raise ScenarioError(f"duplicate frequency within one channel: {omegas}")
        for amp, omega, _ in self.harmonics:
            if amp < 0:
                raise ScenarioError(f"harmonic amplitude must be >= 0, got {amp}")
            if omega <= 0:
                raise ScenarioError(f"harmonic frequency must be > 0, got {omega}")


@dataclass(frozen=True, eq=False)
class Exosystem:
    """Validated exosystem.

    Attributes
    ----------
    S : (p, p) ndarray
        Skew-symmetric generator.
    Gamma : (q, p) ndarray
        Output map.
    w0 : (p,) ndarray
        Initial state.
    blocks : tuple of (start, omega)
        Invariant blocks in the ``Z`` basis; ``omega == 0`` marks a 1x1
        zero block, otherwise a 2x2 rotation starting at ``start``.
    Z : (p, p) ndarray or None
        Orthogonal basis with ``Z.T @ S @ Z`` block diagonal. None means
        the identity.
    """

    S: np.ndarray
    Gamma: np.ndarray
    w0: np.ndarray
    blocks: tuple[tuple[int, float], ...]
    Z: np.ndarray | None = None
    _omega: np.ndarray = field(init=False, repr=False)
    _rot: np.ndarray = field(init=False, repr=False)
    _zero: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rot = [(s, om) for s, om in self.blocks if om != 0.0]
        object.__setattr__(self, "_rot", np.array([s for s, _ in rot], dtype=int))
        object.__setattr__(self, "_omega", np.array([om for _, om in rot], dtype=float))
        object.__setattr__(self, "_zero", np.array([s for s, om in self.blocks if om == 0.0], dtype=int))

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def q(self) -> int:
        return self.Gamma.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return self._omega.copy()

    def _to_block(self, v):
        return v if self.Z is None else v @ self.Z

    def _from_block(self, v):
        return v if self.Z is None else v @ self.Z.T

    def _rotate(self, t, integrate=False):
        t = np.asarray(t, dtype=float)
        v0 = self._to_block(self.w0)
        out = np.empty(t.shape + (self.p,))
        if self._zero.size:
            out[..., self._zero] = v0[self._zero] * (t[..., None] if integrate else 1.0)
        if self._rot.size:
            a0, b0 = v0[self._rot], v0[self._rot + 1]
            th = t[..., None] * self._omega
            c, s = np.cos(th), np.sin(th)
            if integrate:
                om = self._omega
                out[..., self._rot] = (a0 * s + b0 * (1.0 - c)) / om
                out[..., self._rot + 1] = (a0 * (c - 1.0) + b0 * s) / om
            else:
                out[..., self._rot] = a0 * c + b0 * s
                out[..., self._rot + 1] = -a0 * s + b0 * c
        return self._from_block(out)

    def state(self, t):
        """``w(t)``; ``t`` may be an array, giving shape ``t.shape + (p,)``."""
        return self._rotate(t)

    def output(self, t):
        return self.state(t) @ self.Gamma.T

    def integral(self, t):
        """Closed-form ``int_0^t w(s) ds``."""
        return self._rotate(t, integrate=True)

    def flow(self, w0, t):
        """Propagate an arbitrary initial state ``w0`` for time ``t``."""
        return Exosystem(self.S, self.Gamma, np.asarray(w0, dtype=float),
                         self.blocks, self.Z).state(t)

    def amplitude_bound(self, C) -> np.ndarray:
        """Row-wise bound on ``sup_t |C w(t)|`` (sum of per-block amplitudes)."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        Cz = self._to_block(C)
        v0 = self._to_block(self.w0)
        bound = np.zeros(C.shape[0])
        for s, om in self.blocks:
            if om == 0.0:
                bound += np.abs(Cz[:, s] * v0[s])
            else:
                bound += np.hypot(Cz[:, s], Cz[:, s + 1]) * np.hypot(v0[s], v0[s + 1])
        return bound


def _rotation_matrix(blocks, p):
    S = np.zeros((p, p))
    for s, om in blocks:
        if om != 0.0:
            S[s, s + 1] = om
            S[s + 1, s] = -om
    return S


def build_structured(specs, share_constant_mode: bool = False) -> Exosystem:
    """Exosystem generating constant-plus-harmonic channels.

    Each nonzero offset gets a zero block (a single shared one when
    ``share_constant_mode``), each harmonic a rotation block whose first
    coordinate is ``amp*sin(omega*t + phase)``. Block order: shared
    constant first, then channels in order, offset before harmonics.

    Examples
    --------
    >>> e = build_structured([SignalSpec(2.0, ((1.0, 1.0, 0.0),)),
    ...                       SignalSpec(2.0)], share_constant_mode=True)
    >>> e.S
    array([[ 0.,  0.,  0.],
           [ 0.,  0.,  1.],
           [ 0., -1.,  0.]])
    >>> e.Gamma
    array([[1., 1., 0.],
           [1., 0., 0.]])
    """
    specs = [s if isinstance(s, SignalSpec) else SignalSpec(*s) for s in specs]
    if not specs:
        raise ScenarioError("an exosystem needs at least one channel")
    q = len(specs)
    blocks, w0, cols = [], [], []  # cols: list of (channel, coefficient) per state

    shared = None
    if share_constant_mode:
        offsets = [s.offset for s in specs if s.offset != 0.0]
        if offsets:
            shared = offsets[0]
            blocks.append((0, 0.0))
            w0.append(shared)
            cols.append([(j, s.offset / shared) for j, s in enumerate(specs) if s.offset != 0.0])

    for j, spec in enumerate(specs):
        if spec.offset != 0.0 and shared is None:
            blocks.append((len(w0), 0.0))
            w0.append(spec.offset)
            cols.append([(j, 1.0)])
        for amp, omega, phase in spec.harmonics:
            blocks.append((len(w0), float(omega)))
            w0.extend([amp * np.sin(phase), amp * np.cos(phase)])
            cols.append([(j, 1.0)])
            cols.append([])

    p = len(w0)
    Gamma = np.zeros((q, p))
    for i, entries in enumerate(cols):
        for j, coef in entries:
            Gamma[j, i] = coef
    return Exosystem(_rotation_matrix(blocks, p), Gamma, np.array(w0, dtype=float),
                     tuple(blocks))


def build_raw(S, Gamma, w0) -> Exosystem:
    """Validate a user-supplied ``(S, Gamma, w0)`` triple.

    ``S`` must be skew-symmetric to within ``1e-12``; a real Schur
    decomposition then gives the orthogonal basis in which ``S`` is block
    diagonal with rotation blocks.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    p = S.shape[0]
    if S.shape != (p, p):
        raise ScenarioError(f"S must be square, got shape {S.shape}")
    if Gamma.shape[1] != p:
        raise ScenarioError(f"Gamma has {Gamma.shape[1]} columns, expected {p}")
    if w0.shape != (p,):
        raise ScenarioError(f"w0 has length {w0.size}, expected {p}")
    asym = np.abs(S + S.T).max() if p else 0.0
    if asym > SKEW_TOL:
        raise AssumptionViolation(
            f"exosystem generator is not skew symmetric (max |S + S^T| = {asym:.3g})")
    S = 0.5 * (S - S.T)

    if not S.any():
        return Exosystem(S, Gamma, w0, tuple((i, 0.0) for i in range(p)))

    T, Z = scipy.linalg.schur(S, output="real")
    blocks = []
    i = 0
    while i < p:
        if i + 1 < p and abs(T[i + 1, i]) > 1e-14:
            om = 0.5 * (T[i, i + 1] - T[i + 1, i])
            if om < 0:
                Z[:, [i, i + 1]] = Z[:, [i + 1, i]]
                om = -om
            blocks.append((i, float(om)))
            i += 2
        else:
            blocks.append((i, 0.0))
            i += 1
    recon = Z @ _rotation_matrix(blocks, p) @ Z.T
    if np.abs(recon - S).max() > 1e-10:
        raise AssumptionViolation("could not bring the generator to rotation-block form")
    return Exosystem(S, Gamma, w0, tuple(blocks), Z)


def evaluate(e: Exosystem, t: float):
    """Return ``(w(t), d(t))``."""
    if np.any(np.asarray(t) < 0):
        raise ScenarioError("exosystem evaluated at negative time")
    w = e.state(t)
    return w, w @ e.Gamma.T


def from_dict(spec: dict) -> Exosystem:
    """Parse the scenario-file exosystem description."""
    if "raw" in spec:
        raw = spec["raw"]
        try:
            return build_raw(raw["S"], raw["Gamma"], raw["w0"])
        except KeyError as exc:
            raise ScenarioError(f"exosystem.raw: missing field {exc.args[0]!r}")
    if "channels" not in spec:
        raise ScenarioError("exosystem: expected 'channels' or 'raw'")
    specs = []
    for j, ch in enumerate(spec["channels"]):
        try:
            harmonics = tuple((float(h["amp"]), float(h["omega"]), float(h.get("phase", 0.0)))
                              for h in ch.get("harmonics", []))
        except KeyError as exc:
            raise ScenarioError(f"exosystem.channels[{j}]: harmonic missing {exc.args[0]!r}")
        specs.append(SignalSpec(float(ch.get("offset", 0.0)), harmonics))
    return build_structured(specs, bool(spec.get("share_constant_mode", False)))
