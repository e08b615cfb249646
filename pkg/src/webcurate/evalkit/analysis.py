"""Noise audits over search manifests and data-worth curve estimation."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..catalog import SearchManifest
from ..errors import ValidationError

IN_DOMAIN = "in_domain"
CROSS_DOMAIN = "cross_domain"

_Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial fraction (95% by default)."""
    if n <= 0:
        raise ValidationError("interval needs n > 0")
    if not 0 <= successes <= n:
        raise ValidationError(f"successes {successes} outside [0, {n}]")
    p = successes / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class NoiseAudit:
    """A seeded sample of images awaiting in-domain / cross-domain judgments.

    Judgments arrive from humans over time; fraction and interval are
    computed once the sample is fully judged.
    """

    sample: tuple[str, ...]
    seed: int
    judgments: dict[str, str] = field(default_factory=dict)
    fraction: float | None = None
    interval95: tuple[float, float] | None = None

    def judge(self, image_id: str, label: str) -> None:
        if image_id not in set(self.sample):
            raise ValidationError(f"image {image_id!r} is not in the audit sample")
        if label not in (IN_DOMAIN, CROSS_DOMAIN):
            raise ValidationError(f"label must be {IN_DOMAIN!r} or {CROSS_DOMAIN!r}")
        self.judgments[image_id] = label

    def pending(self) -> list[str]:
        return [img for img in self.sample if img not in self.judgments]

    def complete(self) -> "NoiseAudit":
        missing = self.pending()
        if missing:
            raise ValidationError(f"{len(missing)} sample image(s) still unjudged")
        cross = sum(1 for label in self.judgments.values() if label == CROSS_DOMAIN)
        self.fraction = cross / len(self.sample)
        self.interval95 = wilson_interval(cross, len(self.sample))
        return self

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "sample": list(self.sample),
            "judgments": dict(sorted(self.judgments.items())),
            "fraction": self.fraction,
            "interval95": list(self.interval95) if self.interval95 else None,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "NoiseAudit":
        audit = cls(sample=tuple(obj["sample"]), seed=int(obj["seed"]),
                    judgments=dict(obj.get("judgments", {})))
        if obj.get("fraction") is not None:
            audit.fraction = obj["fraction"]
            audit.interval95 = tuple(obj["interval95"])
        return audit


def audit_sample(manifest: SearchManifest, n: int = 1000, seed: int = 0) -> NoiseAudit:
    """Draw a uniform without-replacement sample of images to hand-label."""
    pool = sorted(manifest.image_ids())
    if n > len(pool):
        raise ValidationError(f"sample size {n} exceeds pool of {len(pool)} images")
    rng = random.Random(seed)
    return NoiseAudit(sample=tuple(rng.sample(pool, n)), seed=seed)


@dataclass(frozen=True)
class WorthCurve:
    """Accuracy as a function of noisy-image count, plus the clean baseline."""

    points: tuple[tuple[int, float], ...]
    gt_size: int
    gt_accuracy: float

    def __post_init__(self):
        object.__setattr__(self, "points",
                           tuple((int(x), float(a)) for x, a in self.points))
        xs = [x for x, _ in self.points]
        if sorted(xs) != xs or len(set(xs)) != len(xs):
            raise ValidationError("curve points must be sorted by count, counts distinct")
        if self.gt_size <= 0:
            raise ValidationError("gt_size must be positive")


@dataclass(frozen=True)
class WorthEstimate:
    """How many clean images one noisy image is worth.

    crossing is the smallest count at which the (piecewise-linear)
    curve reaches the clean baseline accuracy; ratio = gt_size /
    crossing. When the curve never gets there the ratio is only an
    upper bound and ``reached`` is False.
    """

    crossing: float
    ratio: float
    reached: bool
    extrapolated: bool

    def to_dict(self) -> dict:
        return {
            "crossing": self.crossing,
            "ratio": self.ratio,
            "reached": self.reached,
            "extrapolated": self.extrapolated,
        }


def worth_estimate(curve: WorthCurve) -> WorthEstimate:
    if len(curve.points) < 2:
        raise ValidationError("worth estimation needs at least two curve points")
    accuracies = [a for _, a in curve.points]
    extrapolated = not (min(accuracies) <= curve.gt_accuracy <= max(accuracies))
    for i, (x, acc) in enumerate(curve.points):
        if acc >= curve.gt_accuracy:
            if i == 0:
                crossing = float(x)
            else:
                x0, a0 = curve.points[i - 1]
                crossing = x0 + (curve.gt_accuracy - a0) * (x - x0) / (acc - a0)
            return WorthEstimate(
                crossing=crossing,
                ratio=curve.gt_size / crossing,
                reached=True,
                extrapolated=extrapolated,
            )
    last_x = curve.points[-1][0]
    return WorthEstimate(
        crossing=float(last_x),
        ratio=curve.gt_size / last_x,  # upper bound: the true crossing is further out
        reached=False,
        extrapolated=extrapolated,
    )


def load_worth_curve(path, gt_size: int, gt_accuracy: float) -> WorthCurve:
    """Read a 2-column CSV (count, accuracy); header optional."""
    points = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        first, second = (tok.strip() for tok in line.split(",", 1))
        if lineno == 1 and not first.replace(".", "").lstrip("-").isdigit():
            continue  # header row
        points.append((int(float(first)), float(second)))
    return WorthCurve(points=tuple(points), gt_size=gt_size, gt_accuracy=gt_accuracy)


def curve_csv(curve: WorthCurve) -> str:
    lines = ["web_images_used,accuracy"]
    lines += [f"{x},{a:.6f}" for x, a in curve.points]
    return "\n".join(lines) + "\n"
