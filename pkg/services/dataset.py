# /services/dataset.py
# Ratings ingestion and generation: the vote scale, the immutable ratings table, the line-format
# parser/writer, the seeded clustered generator and the visible/hidden split of a target user.
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from types import MappingProxyType
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from utils.errors import data_error, io_error, usage_error
from utils.text import format_number, is_skippable, split_fields

log = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-9

Profile = Mapping[int, float]


class VoteScale(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    min_vote: float = 0.0
    max_vote: float = 5.0
    step: float = 1.0  # 0 means continuous

    @model_validator(mode="after")
    def _check(self) -> "VoteScale":
        if not self.min_vote < self.max_vote:
            raise ValueError("min_vote must be below max_vote")
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if self.step > 0:
            n = (self.max_vote - self.min_vote) / self.step
            if abs(n - round(n)) > GRID_TOLERANCE:
                raise ValueError("vote range must be an integer multiple of step")
        return self

    @property
    def midpoint(self) -> float:
        return (self.min_vote + self.max_vote) / 2

    @property
    def span(self) -> float:
        return self.max_vote - self.min_vote

    def contains(self, vote: float) -> bool:
        return self.min_vote <= vote <= self.max_vote

    def on_grid(self, vote: float) -> bool:
        if self.step == 0:
            return True
        n = (vote - self.min_vote) / self.step
        return abs(n - round(n)) <= GRID_TOLERANCE

    def clamp(self, value: float) -> float:
        return min(self.max_vote, max(self.min_vote, value))

    def quantize_array(self, values: np.ndarray) -> np.ndarray:
        """Clamp onto the scale and snap to the nearest grid point, elementwise."""
        values = np.clip(np.asarray(values, dtype=float), self.min_vote, self.max_vote)
        if self.step == 0:
            return values
        snapped = self.min_vote + np.round((values - self.min_vote) / self.step) * self.step
        return np.clip(snapped, self.min_vote, self.max_vote)

    def default_vote(self) -> float:
        # "slightly negative": a tenth of the range below neutral
        return self.midpoint - 0.1 * self.span


class RatingsTable:
    """Sparse user x item vote store. Immutable once built; safe to share between threads."""

    def __init__(self, scale: VoteScale, votes: Mapping[int, Mapping[int, float]] | None = None) -> None:
        self.scale = scale
        frozen: dict[int, Mapping[int, float]] = {}
        for user, items in (votes or {}).items():
            if not items:
                continue
            for item, vote in items.items():
                self._check_vote(user, item, vote)
            frozen[int(user)] = MappingProxyType({int(i): float(v) for i, v in items.items()})
        self._votes = frozen
        self._users = tuple(sorted(frozen))
        self._means = {u: float(np.mean(list(p.values()))) for u, p in frozen.items()}

    def _check_vote(self, user: int, item: int, vote: float) -> None:
        if not self.scale.contains(vote):
            raise data_error(f"vote off scale: user {user} item {item} vote {vote}")
        if not self.scale.on_grid(vote):
            raise data_error(f"vote off step grid: user {user} item {item} vote {vote}")

    def users(self) -> tuple[int, ...]:
        return self._users

    def profile(self, user: int) -> Profile:
        try:
            return self._votes[user]
        except KeyError:
            raise data_error(f"unknown user: {user}") from None

    def mean_vote(self, user: int) -> float:
        self.profile(user)
        return self._means[user]

    def vote_count(self, user: int) -> int:
        return len(self.profile(user))

    def items(self) -> tuple[int, ...]:
        return tuple(sorted({i for p in self._votes.values() for i in p}))

    def triples(self) -> Iterator[tuple[int, int, float]]:
        for user in self._users:
            profile = self._votes[user]
            for item in sorted(profile):
                yield user, item, profile[item]

    def __len__(self) -> int:
        return sum(len(p) for p in self._votes.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RatingsTable):
            return NotImplemented
        return self.scale == other.scale and {u: dict(p) for u, p in self._votes.items()} == {
            u: dict(p) for u, p in other._votes.items()
        }

    def __repr__(self) -> str:
        return f"RatingsTable(users={len(self._users)}, votes={len(self)})"


@dataclass(frozen=True)
class TargetSplit:
    target_user: int
    visible_profile: Mapping[int, float]  # the antigen
    hidden_votes: Mapping[int, float]  # evaluation targets


def parse_ratings(source: IO[bytes] | Iterable[bytes], scale: VoteScale) -> RatingsTable:
    """
    Parse `user_id,item_id,vote` lines (UTF-8). Comment lines start with '#', blank lines are
    skipped. Errors carry the 1-based line number.
    """
    votes: dict[int, dict[int, float]] = {}
    for lineno, raw in enumerate(source, start=1):
        try:
            line = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else str(raw)
        except UnicodeDecodeError:
            raise data_error(f"line {lineno}: not valid UTF-8") from None
        if is_skippable(line):
            continue
        fields = split_fields(line)
        if len(fields) != 3:
            raise data_error(f"line {lineno}: expected 3 fields, got {len(fields)}")
        try:
            user, item = int(fields[0]), int(fields[1])
        except ValueError:
            raise data_error(f"line {lineno}: user and item ids must be integers") from None
        try:
            vote = float(fields[2])
        except ValueError:
            raise data_error(f"line {lineno}: non-numeric vote {fields[2]!r}") from None
        if not math.isfinite(vote) or not scale.contains(vote):
            raise data_error(f"line {lineno}: vote off scale ({fields[2]})")
        if not scale.on_grid(vote):
            raise data_error(f"line {lineno}: vote off step grid ({fields[2]})")
        row = votes.setdefault(user, {})
        if item in row:
            raise data_error(f"line {lineno}: duplicate vote for user {user} item {item}")
        row[item] = vote

    table = RatingsTable(scale, votes)
    log.debug("parsed %r", table)
    return table


def write_ratings(table: RatingsTable, sink: IO[bytes]) -> None:
    for user, item, vote in table.triples():
        sink.write(f"{user},{item},{format_number(vote)}\n".encode("utf-8"))


def generate_synthetic_with_clusters(
    n_users: int,
    n_items: int,
    n_clusters: int,
    density: float,
    noise: float,
    scale: VoteScale,
    seed: int,
) -> tuple[RatingsTable, dict[int, int]]:
    """Like generate_synthetic, also returning the planted user -> cluster assignment."""
    if n_clusters < 1:
        raise usage_error("n_clusters must be at least 1")
    if n_users < n_clusters:
        raise usage_error("n_users must be at least n_clusters")
    if n_items < 1:
        raise usage_error("n_items must be at least 1")
    if not 0 < density <= 1:
        raise usage_error("density must lie in (0, 1]")
    if noise < 0 or not math.isfinite(noise):
        raise usage_error("noise must be a non-negative number")

    rng = np.random.default_rng(seed)
    clusters = rng.permutation(np.arange(n_users) % n_clusters)
    latent = rng.uniform(scale.min_vote, scale.max_vote, size=(n_clusters, n_items))
    voted = rng.random((n_users, n_items)) < density
    jitter = rng.normal(0.0, noise, size=(n_users, n_items)) if noise > 0 else np.zeros((n_users, n_items))

    raw = scale.quantize_array(latent[clusters] + jitter)

    votes: dict[int, dict[int, float]] = {}
    for u in range(n_users):
        cols = np.flatnonzero(voted[u])
        if cols.size:
            votes[u + 1] = {int(c) + 1: float(raw[u, c]) for c in cols}

    table = RatingsTable(scale, votes)
    assignment = {u + 1: int(clusters[u]) for u in range(n_users)}
    log.info("generated synthetic %r (clusters=%d, density=%.3f, noise=%.3f, seed=%d)",
             table, n_clusters, density, noise, seed)
    return table, assignment


def generate_synthetic(
    n_users: int,
    n_items: int,
    n_clusters: int,
    density: float,
    noise: float,
    scale: VoteScale,
    seed: int,
) -> RatingsTable:
    table, _ = generate_synthetic_with_clusters(n_users, n_items, n_clusters, density, noise, scale, seed)
    return table


def split_target(table: RatingsTable, target_user: int, visible_fraction: float, seed: int) -> TargetSplit:
    if not 0 < visible_fraction <= 1:
        raise usage_error("visible_fraction must lie in (0, 1]")
    profile = table.profile(target_user)
    if len(profile) < 2:
        raise data_error(f"user {target_user} has fewer than 2 votes")

    items = sorted(profile)
    n_visible = max(1, int(math.floor(visible_fraction * len(items) + 0.5)))
    rng = np.random.default_rng(seed)
    chosen = {items[i] for i in rng.choice(len(items), size=n_visible, replace=False)}

    visible = {i: profile[i] for i in items if i in chosen}
    hidden = {i: profile[i] for i in items if i not in chosen}
    return TargetSplit(target_user, MappingProxyType(visible), MappingProxyType(hidden))


def load_ratings(path: str | Path, scale: VoteScale) -> RatingsTable:
    try:
        with Path(path).open("rb") as f:
            return parse_ratings(f, scale)
    except OSError as e:
        raise io_error(f"cannot read ratings file {path}: {e}") from e


def save_ratings(table: RatingsTable, path: str | Path) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with Path(path).open("wb") as f:
            write_ratings(table, f)
    except OSError as e:
        raise io_error(f"cannot write ratings file {path}: {e}") from e
