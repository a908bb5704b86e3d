"""Image corruptions on [0,1] grayscale images, plus the CLI spec grammar.

Five kinds: salt_pepper, gaussian, rayleigh, uniform, perlin. Additive
noises clamp the result back into [0,1] rather than renormalizing, so
untouched pixels keep their values. Specs parse from strings like
``salt_pepper:p=0.3`` or ``perlin:res=14``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Required parameter names per kind; the first is the natural sweep axis.
_PARAMS = {
    "salt_pepper": ("p",),
    "gaussian": ("sigma",),
    "rayleigh": ("scale",),
    "uniform": ("high", "low"),
    "perlin": ("res", "amplitude"),
}
KINDS = tuple(_PARAMS)

_DEFAULTS = {"low": 0.0, "amplitude": 1.0}


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {KINDS}")
        allowed = _PARAMS[self.kind]
        seen = dict(self.params)
        for name in seen:
            if name not in allowed:
                raise ValueError(f"{self.kind} does not take parameter {name!r}")
        merged = {name: _DEFAULTS[name] for name in allowed if name in _DEFAULTS}
        merged.update(seen)
        for name in allowed:
            if name not in merged:
                raise ValueError(f"{self.kind} requires parameter {name!r}")
        object.__setattr__(
            self, "params", tuple((n, float(merged[n])) for n in allowed))
        self._validate_ranges()

    def _validate_ranges(self):
        p = dict(self.params)
        if self.kind == "salt_pepper" and not 0.0 <= p["p"] <= 1.0:
            raise ValueError("salt_pepper p must lie in [0, 1]")
        if self.kind == "gaussian" and p["sigma"] < 0.0:
            raise ValueError("gaussian sigma must be >= 0")
        if self.kind == "rayleigh" and p["scale"] < 0.0:
            raise ValueError("rayleigh scale must be >= 0")
        if self.kind == "uniform" and p["low"] > p["high"]:
            raise ValueError("uniform needs low <= high")
        if self.kind == "perlin":
            res = p["res"]
            if res != int(res) or not 1 <= res <= 28:
                raise ValueError("perlin res must be an integer in [1, 28]")

    @classmethod
    def make(cls, kind: str, **params: float) -> "NoiseSpec":
        return cls(kind, tuple(params.items()))

    def __getitem__(self, name: str) -> float:
        return dict(self.params)[name]

    @property
    def sweep_param(self) -> str:
        return _PARAMS[self.kind][0]

    def with_param(self, name: str, value: float) -> "NoiseSpec":
        updated = dict(self.params)
        if name not in updated:
            raise ValueError(f"{self.kind} does not take parameter {name!r}")
        updated[name] = value
        return replace(self, params=tuple(updated.items()))

    def label(self) -> str:
        """Canonical text form, also valid parser input."""
        shown = [
            (n, v) for n, v in self.params
            if not (n in _DEFAULTS and v == _DEFAULTS[n])
        ]
        args = ",".join(f"{n}={v:g}" for n, v in shown)
        return f"{self.kind}:{args}"


def parse_noise_spec(text: str) -> NoiseSpec:
    """Parse ``KIND:name=value[,name=value]`` into a validated spec."""
    kind, _, rest = text.strip().partition(":")
    pairs = []
    if rest:
        for item in rest.split(","):
            name, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed noise parameter {item!r}")
            try:
                pairs.append((name.strip(), float(value)))
            except ValueError:
                raise ValueError(f"noise parameter {name!r} has non-numeric "
                                 f"value {value!r}") from None
    return NoiseSpec(kind, tuple(pairs))


def parse_sweep(text: str) -> list[NoiseSpec]:
    """Parse ``KIND:param=a,b,c`` into one spec per listed value."""
    kind, _, rest = text.strip().partition(":")
    name, eq, values = rest.partition("=")
    if not eq or not values:
        raise ValueError(f"malformed sweep {text!r}; expected KIND:param=a,b,c")
    out = []
    for raw in values.split(","):
        try:
            v = float(raw)
        except ValueError:
            raise ValueError(f"sweep value {raw!r} is not numeric") from None
        out.append(NoiseSpec(kind, ((name.strip(), v),)))
    return out


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin_field(resolution: int, rng: np.random.Generator,
                 size: int = 28) -> np.ndarray:
    """Classic 2-d gradient noise on a (resolution+1)^2 lattice, sampled on a
    size x size pixel grid aligned so lattice corners fall on pixels. Values
    lie in [-1, 1] and vanish at lattice corners."""
    if resolution != int(resolution) or not 1 <= resolution <= size:
        raise ValueError(f"resolution must be an integer in [1, {size}]")
    resolution = int(resolution)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(resolution + 1, resolution + 1))
    gx, gy = np.cos(angles), np.sin(angles)

    coord = np.arange(size) * (resolution / size)
    x, y = np.meshgrid(coord, coord, indexing="ij")
    ix = np.minimum(x.astype(np.int64), resolution - 1)
    iy = np.minimum(y.astype(np.int64), resolution - 1)
    tx, ty = x - ix, y - iy

    def corner_dot(ax: int, ay: int) -> np.ndarray:
        return (gx[ix + ax, iy + ay] * (tx - ax)
                + gy[ix + ax, iy + ay] * (ty - ay))

    ux, uy = _fade(tx), _fade(ty)
    n0 = corner_dot(0, 0) + ux * (corner_dot(1, 0) - corner_dot(0, 0))
    n1 = corner_dot(0, 1) + ux * (corner_dot(1, 1) - corner_dot(0, 1))
    return n0 + uy * (n1 - n0)


def corrupt(img: np.ndarray, spec: NoiseSpec,
            rng: np.random.Generator) -> np.ndarray:
    """Corrupted copy of the image, clamped to [0,1]. Shape is preserved;
    perlin needs a square image (a flat 784 vector is treated as 28 x 28)."""
    x = np.asarray(img, dtype=np.float64)
    p = dict(spec.params)
    if spec.kind == "salt_pepper":
        u = rng.random(x.shape)
        out = np.where(u < p["p"] / 2.0, 1.0, np.where(u < p["p"], 0.0, x))
    elif spec.kind == "gaussian":
        out = x + rng.normal(0.0, p["sigma"], size=x.shape)
    elif spec.kind == "rayleigh":
        out = x + rng.rayleigh(p["scale"], size=x.shape)
    elif spec.kind == "uniform":
        out = x + rng.uniform(p["low"], p["high"], size=x.shape)
    else:  # perlin
        side = x.shape[0] if x.ndim == 2 else int(round(np.sqrt(x.size)))
        square = x.ndim == 2 and x.shape[0] == x.shape[1] or x.ndim == 1
        if not square or side * side != x.size:
            raise ValueError(f"perlin needs a square image, got shape {x.shape}")
        fld = perlin_field(int(p["res"]), rng, size=side) * p["amplitude"]
        out = x + fld.reshape(x.shape)
    return np.clip(out, 0.0, 1.0)
