"""System definition files.

Plain sectioned key-value text; unknown sections or keys are rejected
with line diagnostics.  Layout::

    [forcing]
    dim = 1
    envelope_xi = 8.0        # optional decay rate of the mode envelope
    envelope_F = 2.5         # optional amplitude (auto-fit when absent)
    0 = 2.5, 0               # lattice vector = re, im   (one per mode)
    1 = 0, -0.75
    -1 = 0, 0.75

    [freq]
    omega = 1.0              # d comma- or space-separated entries
    C0 = 0.5                 # optional non-resonance constant
    tau = 0                  # optional exponent (must exceed d-1 if d>1)

    [nonlinearity]
    kind = even              # odd | even | poly
    p = 1
    coeffs = 0, 0, 1         # poly only: degrees 1..2p+1 ascending

    [params]
    gamma = 9.0

Comments start with '#'; for d > 1 the mode keys are space-separated
integers like ``1 0``.
"""

from __future__ import annotations

from .errors import ConfigError
from .model import ForcingSpectrum, FrequencyVector, Nonlinearity, SystemConfig

__all__ = ["parse_system_file", "parse_system_text"]

_SECTIONS = {
    "forcing": {"dim", "envelope_xi", "envelope_F"},
    "freq": {"omega", "C0", "tau"},
    "nonlinearity": {"kind", "p", "coeffs"},
    "params": {"gamma"},
}


def _floats(text: str) -> list[float]:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    return [float(p) for p in parts]


def _mode_key(key: str):
    parts = key.replace(",", " ").split()
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        return None


def parse_system_text(text: str, source: str = "<string>") -> SystemConfig:
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    modes: dict[tuple, complex] = {}
    current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"{source}: unknown section [{name}]", line=lineno, column=1)
            current = name
            continue
        if current is None:
            raise ConfigError(f"{source}: entry before any section", line=lineno, column=1)
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value'", line=lineno, column=1)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        column = raw.index(key) + 1 if key in raw else 1
        if current == "forcing":
            nu = _mode_key(key)
            if nu is not None:
                try:
                    re_im = _floats(value)
                except ValueError:
                    raise ConfigError(f"{source}: bad amplitude for mode {key!r}", line=lineno, column=column)
                if len(re_im) != 2:
                    raise ConfigError(
                        f"{source}: mode {key!r} needs 're, im'", line=lineno, column=column
                    )
                modes[nu] = complex(re_im[0], re_im[1])
                continue
        if key not in _SECTIONS[current]:
            raise ConfigError(f"{source}: unknown key {key!r} in [{current}]", line=lineno, column=column)
        sections[current][key] = (value, lineno, column)

    def need(section, key):
        if key not in sections[section]:
            raise ConfigError(f"{source}: missing key {key!r} in [{section}]")
        return sections[section][key]

    def get(section, key, default=None):
        if key in sections[section]:
            return sections[section][key]
        return (default, None, None)

    def as_float(entry, what):
        value, lineno, column = entry
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{source}: {what} must be a number, got {value!r}", line=lineno, column=column)

    def as_int(entry, what):
        value, lineno, column = entry
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{source}: {what} must be an integer, got {value!r}", line=lineno, column=column)

    try:
        dim = as_int(get("forcing", "dim", "1"), "dim") if "dim" in sections["forcing"] else 1
        omega_entry = need("freq", "omega")
        omega = tuple(_floats(omega_entry[0]))
        if len(omega) != dim:
            raise ConfigError(
                f"{source}: omega has {len(omega)} entries but dim = {dim}",
                line=omega_entry[1],
                column=omega_entry[2],
            )
        c0d = as_float(get("freq", "C0", "0.5"), "C0") if "C0" in sections["freq"] else 0.5
        tau = as_float(get("freq", "tau", "0"), "tau") if "tau" in sections["freq"] else (
            float(dim) if dim > 1 else 0.0
        )
        freq = FrequencyVector(omega, c0_dioph=c0d, tau=tau)

        if not modes:
            raise ConfigError(f"{source}: [forcing] holds no modes")
        for nu in modes:
            if len(nu) != dim:
                raise ConfigError(f"{source}: mode {nu} does not match dim = {dim}")
        kwargs = {}
        if "envelope_xi" in sections["forcing"]:
            kwargs["envelope_xi"] = as_float(sections["forcing"]["envelope_xi"], "envelope_xi")
        if "envelope_F" in sections["forcing"]:
            kwargs["envelope_F"] = as_float(sections["forcing"]["envelope_F"], "envelope_F")
        forcing = ForcingSpectrum.from_modes(dim, modes, **kwargs)

        kind_entry = need("nonlinearity", "kind")
        kind = kind_entry[0].strip().lower()
        p = as_int(need("nonlinearity", "p"), "p")
        if kind == "odd":
            g = Nonlinearity.odd_monomial(p)
        elif kind == "even":
            g = Nonlinearity.even_monomial(p)
        elif kind == "poly":
            coeffs_entry = need("nonlinearity", "coeffs")
            coeffs = _floats(coeffs_entry[0])
            if len(coeffs) != 2 * p + 1:
                raise ConfigError(
                    f"{source}: poly needs 2p+1 = {2 * p + 1} coefficients, got {len(coeffs)}",
                    line=coeffs_entry[1],
                    column=coeffs_entry[2],
                )
            g = Nonlinearity.polynomial(coeffs)
        else:
            raise ConfigError(
                f"{source}: kind must be odd/even/poly, got {kind!r}",
                line=kind_entry[1],
                column=kind_entry[2],
            )

        gamma = as_float(need("params", "gamma"), "gamma")
        return SystemConfig(forcing=forcing, freq=freq, g=g, gamma=gamma)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_system_file(path) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system_text(fh.read(), source=str(path))
