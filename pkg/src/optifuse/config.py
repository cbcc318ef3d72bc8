"""Pipeline configuration: one flat key=value namespace shared with the CLI.

Every tunable of the reconstruction pipeline lives here with its
default.  The file format is one `key=value` per line, `#` comments and
blank lines ignored, unknown keys rejected so typos fail loudly instead
of silently running defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class PipelineConfig:
    """Tunables for segmentation, detection, clustering, and expansion."""

    # optical segmentation
    sigma: float = 2.0
    block: int = 31
    offset: float = 0.02
    marker_frac: float = 0.5
    dilate_px: int = 3
    min_region_size: int = 334
    # sonar detection and clustering
    train: int = 16
    guard: int = 4
    alpha: float = 3.0
    eps: float = 0.10
    min_pts: int = 3
    # fusion
    arc_samples_cap: int = 256
    row_stride: int = 1
    column_fill: str = "skip"
    # turbidity synthesis
    turbidity_mode: str = "relative"
    # simulator noise
    noise_seed: int = 0
    noise_amplitude: float = 0.05

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.block < 3 or self.block % 2 == 0:
            raise ValueError(f"block must be odd and >= 3, got {self.block}")
        if not 0.0 < self.marker_frac <= 1.0:
            raise ValueError(f"marker_frac must be in (0, 1], got {self.marker_frac}")
        if self.dilate_px < 0:
            raise ValueError(f"dilate_px must be non-negative, got {self.dilate_px}")
        if self.min_region_size < 0:
            raise ValueError(f"min_region_size must be non-negative, got {self.min_region_size}")
        if self.train < 1:
            raise ValueError(f"train must be >= 1, got {self.train}")
        if self.guard < 0:
            raise ValueError(f"guard must be >= 0, got {self.guard}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")
        if self.arc_samples_cap < 2:
            raise ValueError(f"arc_samples_cap must be >= 2, got {self.arc_samples_cap}")
        if self.row_stride < 1:
            raise ValueError(f"row_stride must be >= 1, got {self.row_stride}")
        if self.column_fill not in ("skip", "nearest"):
            raise ValueError(f"column_fill must be 'skip' or 'nearest', got {self.column_fill!r}")
        if self.turbidity_mode not in ("relative", "absolute"):
            raise ValueError(
                f"turbidity_mode must be 'relative' or 'absolute', got {self.turbidity_mode!r}"
            )
        if self.noise_amplitude < 0:
            raise ValueError(f"noise_amplitude must be non-negative, got {self.noise_amplitude}")

    def to_text(self) -> str:
        """Render the config as the canonical key=value file."""
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        """Parse key=value lines; unknown keys are errors, missing keys default."""
        types = {f.name: f.type for f in fields(cls)}
        casts = {"float": float, "int": int, "str": str}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno} is not key=value: {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in types:
                raise ValueError(f"unknown config key {key!r} on line {lineno}")
            try:
                values[key] = casts[types[key]](value)
            except ValueError as exc:
                raise ValueError(f"bad value for {key!r} on line {lineno}: {value!r}") from exc
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_text(fh.read())
