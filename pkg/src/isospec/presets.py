"""Built-in superpotentials with default windows and reference constants."""

from __future__ import annotations

from dataclasses import dataclass, field

from .family import SuperpotentialSpec


@dataclass(frozen=True)
class Preset:
    name: str
    F: str
    f: str
    window: tuple[float, float]
    description: str
    plot_gammas: tuple[float, ...]
    constants: dict = field(default_factory=dict)
    branch: str | None = None
    # gammas used by the invariant suite; must be regular on the full line
    check_gammas: tuple[float, ...] = ()

    def spec(self) -> SuperpotentialSpec:
        return SuperpotentialSpec.from_sources(self.F, self.f, self.branch)


def _fmt_c(c: float) -> str:
    return repr(float(c)) if c != int(c) else str(int(c))


def constant_preset(c: float = 1.0) -> Preset:
    if c <= 0:
        raise ValueError("the constant preset needs c > 0")
    return Preset(
        name="constant",
        F=_fmt_c(c),
        f="x",
        window=(-10.0, 10.0),
        description="F = c: flat partners V1 = V2 = c^2, continuous spectrum only",
        plot_gammas=(-5.0, -4.0, -3.0, -2.0),
        constants={"gamma_s": -1.0 / (2.0 * c), "gamma_s formula": "-1/(2c)"},
        check_gammas=(-5.0, -2.0, -1.0),
    )


PRESETS: dict[str, Preset] = {
    "case1a": Preset(
        name="case1a",
        F="sqrt(u)",
        f="x^2+1",
        window=(-4.0, 4.0),
        description="power-law inner function n=2, a2=1, a0=1",
        plot_gammas=(-5.0, -4.0, -3.0, -2.0),
        constants={"gamma_s": -0.44779},
        check_gammas=(-5.0, -2.0, -1.0),
    ),
    "harmonic": Preset(
        name="harmonic",
        F="sqrt(u)",
        f="x^2",
        window=(-6.0, 6.0),
        description="power-law inner function n=2, a2=1, a0=0: harmonic oscillator",
        plot_gammas=(-4.0, -3.0, -2.0, 2.0, 3.0, 4.0),
        constants={"gamma_s": 0.886227, "gamma_s formula": "+-sqrt(pi)/2"},
        # sqrt(x^2) evaluates to |x|; the smooth continuation is x
        branch="x",
        check_gammas=(-4.0, 2.0, 4.0),
    ),
    "fresnel": Preset(
        name="fresnel",
        F="sin(u)",
        f="x^2",
        window=(-2.0, 8.0),
        description="Fresnel-like exponent: singular for every gamma",
        plot_gammas=(-5.0, -4.0, -3.0, -2.0),
        constants={"L (min of mu on x >= 0)": 0.167016},
        check_gammas=(),
    ),
    "quartic": Preset(
        name="quartic",
        F="u^2-1",
        f="x-1",
        window=(-4.0, 8.0),
        description="asymmetric double well from a quadratic superpotential",
        plot_gammas=(-49.0, -37.0, -28.33, -26.0),
        constants={"gamma_s": -19.3694, "gamma_c": -28.33},
        check_gammas=(-49.0, -37.0, -26.0),
    ),
    "constant": constant_preset(1.0),
}


def get_preset(name: str, c: float | None = None) -> Preset:
    if name == "constant" and c is not None:
        return constant_preset(c)
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
