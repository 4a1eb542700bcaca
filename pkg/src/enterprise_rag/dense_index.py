"""HNSW approximate nearest-neighbor index over chunk embeddings.

A multi-layer proximity graph: every node lives at layer 0, and each node
is promoted to higher layers with exponentially decaying probability
(level = floor(-ln(u) * level_multiplier)). Search greedily descends from
the top-layer entry point, then runs a beam search of width ef at layer 0.

Similarity is the inner product of unit vectors (== cosine); internally we
work with distance d = 1 - <q, v> so heaps order naturally. Optional 8-bit
scalar quantization stores per-dimension affine codes, computed over the
first 1,024 inserted vectors and frozen; scoring dequantizes on the fly.

The index is deterministic: a fixed RNG seed and insertion order yield a
byte-identical persisted file. Ties in rankings break by ascending
chunk_id. There is no deletion; after freeze() the index is immutable and
safe for concurrent searches.
"""

from __future__ import annotations

import heapq
import math
import random
import struct
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"HNSW"
FORMAT_VERSION = 1
QUANT_SAMPLE_SIZE = 1024

DEFAULT_M = 32
DEFAULT_EF_CONSTRUCTION = 200
DEFAULT_EF_SEARCH = 50


class IndexFormatError(RuntimeError):
    """Corrupt or version-incompatible persisted index."""


@dataclass(frozen=True)
class HnswParams:
    M: int = DEFAULT_M
    ef_construction: int = DEFAULT_EF_CONSTRUCTION
    ef_search: int = DEFAULT_EF_SEARCH
    level_multiplier: float = 0.0  # 0 -> 1/ln(M)

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be >= M")
        if self.ef_search < 1:
            raise ValueError("ef_search must be >= 1")
        if self.level_multiplier <= 0.0:
            object.__setattr__(self, "level_multiplier", 1.0 / math.log(self.M))


@dataclass
class QuantizationSpec:
    """Per-dimension affine 8-bit codes: v ~ mins + code * scales."""

    mins: np.ndarray
    scales: np.ndarray
    bits: int = 8

    @classmethod
    def fit(cls, sample: np.ndarray) -> "QuantizationSpec":
        mins = sample.min(axis=0).astype(np.float32)
        span = sample.max(axis=0).astype(np.float32) - mins
        scales = np.maximum(span / 255.0, np.float32(1e-12))
        return cls(mins=mins, scales=scales)

    def quantize(self, matrix: np.ndarray) -> np.ndarray:
        codes = np.rint((matrix - self.mins) / self.scales)
        return np.clip(codes, 0, 255).astype(np.uint8)

    def dequantize(self, codes: np.ndarray) -> np.ndarray:
        return (self.mins + codes.astype(np.float32) * self.scales).astype(np.float32)


class DenseIndex:
    def __init__(
        self,
        dims: int,
        params: HnswParams | None = None,
        quantized: bool = False,
        seed: int = 0,
    ):
        if dims < 1:
            raise ValueError("dims must be >= 1")
        self.dims = dims
        self.params = params or HnswParams()
        self.quantized = quantized
        self.seed = seed
        self._rng = random.Random(seed)

        self.entry_point = -1
        self.max_level = -1
        self._chunk_ids: list[str] = []
        self._node_of: dict[str, int] = {}
        self._levels: list[int] = []
        # _neighbors[node][layer] -> list of node ids, layers 0..level
        self._neighbors: list[list[list[int]]] = []

        self._vectors = np.zeros((0, dims), dtype=np.float32)
        self._codes: np.ndarray | None = None
        self.quant_spec: QuantizationSpec | None = None
        self._count = 0
        self._frozen = False

    def __len__(self) -> int:
        return self._count

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._node_of

    @property
    def chunk_ids(self) -> list[str]:
        return list(self._chunk_ids)

    # -- vector storage ------------------------------------------------------

    def _grow(self, needed: int) -> None:
        store = self._codes if self._codes is not None else self._vectors
        if needed <= store.shape[0]:
            return
        new_cap = max(needed, store.shape[0] * 2, 64)
        grown = np.zeros((new_cap, self.dims), dtype=store.dtype)
        grown[: self._count] = store[: self._count]
        if self._codes is not None:
            self._codes = grown
        else:
            self._vectors = grown

    def _rows(self, nodes: list[int] | np.ndarray) -> np.ndarray:
        if self._codes is not None:
            return self.quant_spec.dequantize(self._codes[nodes])
        return self._vectors[nodes]

    def _vector(self, node: int) -> np.ndarray:
        if self._codes is not None:
            return self.quant_spec.dequantize(self._codes[node : node + 1])[0]
        return self._vectors[node]

    def _distances(self, query: np.ndarray, nodes: list[int]) -> np.ndarray:
        return 1.0 - (self._rows(nodes) @ query).astype(np.float64)

    def _exact_scores(self, query: np.ndarray, nodes) -> np.ndarray:
        """Inner products with a per-row-uniform float64 reduction. BLAS
        matmul may round identical rows differently depending on their
        position in the block kernel, which would break exact ties; result
        scoring needs ties between identical vectors to be exact so the
        chunk_id tie-break applies."""
        rows = self._rows(nodes).astype(np.float64)
        return (rows * query.astype(np.float64)).sum(axis=1)

    def _init_quantization(self) -> None:
        if not self.quantized or self.quant_spec is not None:
            return
        sample = self._vectors[: min(self._count, QUANT_SAMPLE_SIZE)]
        self.quant_spec = QuantizationSpec.fit(sample)
        codes = np.zeros((self._vectors.shape[0], self.dims), dtype=np.uint8)
        codes[: self._count] = self.quant_spec.quantize(self._vectors[: self._count])
        self._codes = codes
        self._vectors = np.zeros((0, self.dims), dtype=np.float32)

    # -- construction --------------------------------------------------------

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()  # (0, 1]
        return int(-math.log(u) * self.params.level_multiplier)

    def insert(self, chunk_id: str, vec: np.ndarray) -> None:
        """Insert one unit vector under chunk_id, wiring graph links at
        every layer up to the node's drawn level."""
        if self._frozen:
            raise RuntimeError("index is frozen; inserts are not allowed")
        if chunk_id in self._node_of:
            raise ValueError(f"duplicate chunk_id: {chunk_id}")
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dims,):
            raise ValueError(f"dimension mismatch: expected {self.dims}, got {vec.shape}")

        node = self._count
        self._grow(node + 1)
        if self._codes is not None:
            self._codes[node] = self.quant_spec.quantize(vec[None, :])[0]
        else:
            self._vectors[node] = vec
        self._count += 1

        level = self._draw_level()
        self._chunk_ids.append(chunk_id)
        self._node_of[chunk_id] = node
        self._levels.append(level)
        self._neighbors.append([[] for _ in range(level + 1)])

        if self.entry_point < 0:
            self.entry_point = node
            self.max_level = level
        else:
            entry = [self.entry_point]
            for layer in range(self.max_level, level, -1):
                nearest = self._search_layer(vec, entry, layer, 1)
                entry = [nearest[0][1]]
            for layer in range(min(level, self.max_level), -1, -1):
                found = self._search_layer(vec, entry, layer, self.params.ef_construction)
                chosen = [n for _, n in found[: self.params.M]]
                self._neighbors[node][layer] = list(chosen)
                cap = self.params.M if layer > 0 else 2 * self.params.M
                for other in chosen:
                    self._neighbors[other][layer].append(node)
                    if len(self._neighbors[other][layer]) > cap:
                        self._shrink_neighbors(other, layer, cap)
                entry = [n for _, n in found]
            if level > self.max_level:
                self.entry_point = node
                self.max_level = level

        if (
            self.quantized
            and self.quant_spec is None
            and self._count >= QUANT_SAMPLE_SIZE
        ):
            self._init_quantization()

    def _shrink_neighbors(self, node: int, layer: int, cap: int) -> None:
        """Degree cap enforcement: keep the cap closest neighbors."""
        ids = self._neighbors[node][layer]
        dists = self._distances(self._vector(node), ids)
        order = sorted(zip(dists.tolist(), ids))
        self._neighbors[node][layer] = [n for _, n in order[:cap]]

    def _search_layer(
        self,
        query: np.ndarray,
        entry_points: list[int],
        layer: int,
        ef: int,
    ) -> list[tuple[float, int]]:
        """Beam search of width ef at one layer. Returns (distance, node)
        ascending by distance."""
        visited = set(entry_points)
        dists = self._distances(query, entry_points)
        candidates: list[tuple[float, int]] = []  # min-heap
        best: list[tuple[float, int]] = []  # max-heap on -distance
        for node, dist in zip(entry_points, dists.tolist()):
            heapq.heappush(candidates, (dist, node))
            heapq.heappush(best, (-dist, node))

        while candidates:
            dist, node = heapq.heappop(candidates)
            if len(best) >= ef and dist > -best[0][0]:
                break
            fresh = [n for n in self._neighbors[node][layer] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            for other, other_dist in zip(fresh, self._distances(query, fresh).tolist()):
                if len(best) < ef:
                    heapq.heappush(candidates, (other_dist, other))
                    heapq.heappush(best, (-other_dist, other))
                elif other_dist < -best[0][0]:
                    heapq.heappush(candidates, (other_dist, other))
                    heapq.heapreplace(best, (-other_dist, other))
        return sorted((-neg, node) for neg, node in best)

    # -- queries -------------------------------------------------------------

    def freeze(self) -> None:
        """Finalize the build: compute the quantization spec if pending and
        make the index immutable for concurrent searching."""
        self._init_quantization()
        self._frozen = True

    def search(
        self,
        query: np.ndarray,
        k: int,
        ef_search: int | None = None,
    ) -> list[tuple[str, float]]:
        """Approximate top-k by inner product, score descending. Raises on
        an empty index; returns min(k, len) results."""
        if self._count == 0:
            raise ValueError("search on empty index")
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._frozen:
            self.freeze()
        query = np.asarray(query, dtype=np.float32)
        if query.shape != (self.dims,):
            raise ValueError(f"dimension mismatch: expected {self.dims}, got {query.shape}")
        ef = max(ef_search if ef_search is not None else self.params.ef_search, k)

        entry = [self.entry_point]
        for layer in range(self.max_level, 0, -1):
            nearest = self._search_layer(query, entry, layer, 1)
            entry = [nearest[0][1]]
        found = self._search_layer(query, entry, 0, ef)
        nodes = [node for _, node in found]
        scores = self._exact_scores(query, nodes)
        scored = [
            (self._chunk_ids[node], float(s)) for node, s in zip(nodes, scores.tolist())
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def brute_force_search(
        self, query: np.ndarray, k: int
    ) -> list[tuple[str, float]]:
        """Exact top-k by inner product over every stored vector; the
        recall oracle for `search`. Ties break by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if self._count == 0:
            return []
        query = np.asarray(query, dtype=np.float32)
        scores = self._exact_scores(query, np.arange(self._count))
        pairs = sorted(
            zip(scores.tolist(), self._chunk_ids),
            key=lambda item: (-item[0], item[1]),
        )
        return [(cid, score) for score, cid in pairs[:k]]

    # -- graph inspection (used by tests) -------------------------------------

    def reachable_from_entry(self) -> set[int]:
        """Nodes reachable from the entry point via layer-0 edges."""
        if self.entry_point < 0:
            return set()
        seen = {self.entry_point}
        stack = [self.entry_point]
        while stack:
            node = stack.pop()
            for other in self._neighbors[node][0]:
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        return seen

    def degree_violations(self) -> list[tuple[int, int, int]]:
        """(node, layer, degree) entries exceeding the layer cap."""
        out = []
        for node, layers in enumerate(self._neighbors):
            for layer, neigh in enumerate(layers):
                cap = self.params.M if layer > 0 else 2 * self.params.M
                if len(neigh) > cap:
                    out.append((node, layer, len(neigh)))
        return out

    # -- persistence -----------------------------------------------------------

    def to_bytes(self) -> bytes:
        if not self._frozen:
            self.freeze()
        buf = bytearray()
        flags = 1 if (self.quantized and self.quant_spec is not None) else 0
        buf += struct.pack(
            "<4sIIIIIIIdqq",
            MAGIC,
            FORMAT_VERSION,
            flags,
            self.dims,
            self._count,
            self.params.M,
            self.params.ef_construction,
            self.params.ef_search,
            self.params.level_multiplier,
            self.entry_point,
            self.max_level,
        )
        if flags & 1:
            buf += self.quant_spec.mins.astype("<f4").tobytes()
            buf += self.quant_spec.scales.astype("<f4").tobytes()
        for cid in self._chunk_ids:
            raw = cid.encode("utf-8")
            buf += struct.pack("<I", len(raw)) + raw
        buf += np.asarray(self._levels, dtype="<i4").tobytes()
        if flags & 1:
            buf += self._codes[: self._count].tobytes()
        else:
            buf += self._vectors[: self._count].astype("<f4").tobytes()
        for node in range(self._count):
            for layer in range(self._levels[node] + 1):
                ids = self._neighbors[node][layer]
                buf += struct.pack("<I", len(ids))
                buf += np.asarray(ids, dtype="<u4").tobytes()
        buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
        return bytes(buf)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DenseIndex":
        header_size = struct.calcsize("<4sIIIIIIIdqq")
        if len(blob) < header_size + 4:
            raise IndexFormatError("corrupt index: truncated file")
        body, (checksum,) = blob[:-4], struct.unpack("<I", blob[-4:])
        if zlib.crc32(body) & 0xFFFFFFFF != checksum:
            raise IndexFormatError("corrupt index: checksum mismatch")
        (
            magic,
            version,
            flags,
            dims,
            count,
            m,
            ef_construction,
            ef_search,
            level_multiplier,
            entry_point,
            max_level,
        ) = struct.unpack("<4sIIIIIIIdqq", body[:header_size])
        if magic != MAGIC:
            raise IndexFormatError("corrupt index: bad magic")
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported index format version: {version}")

        params = HnswParams(
            M=m,
            ef_construction=ef_construction,
            ef_search=ef_search,
            level_multiplier=level_multiplier,
        )
        index = cls(dims=dims, params=params, quantized=bool(flags & 1))
        offset = header_size
        try:
            if flags & 1:
                mins = np.frombuffer(body, dtype="<f4", count=dims, offset=offset).copy()
                offset += 4 * dims
                scales = np.frombuffer(body, dtype="<f4", count=dims, offset=offset).copy()
                offset += 4 * dims
                index.quant_spec = QuantizationSpec(mins=mins, scales=scales)
            chunk_ids = []
            for _ in range(count):
                (length,) = struct.unpack_from("<I", body, offset)
                offset += 4
                chunk_ids.append(body[offset : offset + length].decode("utf-8"))
                offset += length
            levels = np.frombuffer(body, dtype="<i4", count=count, offset=offset).tolist()
            offset += 4 * count
            if flags & 1:
                codes = np.frombuffer(
                    body, dtype=np.uint8, count=count * dims, offset=offset
                ).reshape(count, dims).copy()
                offset += count * dims
                index._codes = codes
                index._vectors = np.zeros((0, dims), dtype=np.float32)
            else:
                vectors = np.frombuffer(
                    body, dtype="<f4", count=count * dims, offset=offset
                ).reshape(count, dims).copy()
                offset += 4 * count * dims
                index._vectors = vectors
            neighbors = []
            for node in range(count):
                layers = []
                for _ in range(levels[node] + 1):
                    (n,) = struct.unpack_from("<I", body, offset)
                    offset += 4
                    ids = np.frombuffer(body, dtype="<u4", count=n, offset=offset).tolist()
                    offset += 4 * n
                    layers.append(ids)
                neighbors.append(layers)
        except (struct.error, ValueError) as exc:
            raise IndexFormatError("corrupt index: truncated body") from exc

        index._chunk_ids = chunk_ids
        index._node_of = {cid: i for i, cid in enumerate(chunk_ids)}
        if len(index._node_of) != count:
            raise IndexFormatError("corrupt index: id_map is not a bijection")
        index._levels = levels
        index._neighbors = neighbors
        index._count = count
        index.entry_point = entry_point
        index.max_level = max_level
        index._frozen = True
        return index

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DenseIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_dense_index(
    items: list[tuple[str, np.ndarray]],
    dims: int,
    params: HnswParams | None = None,
    quantized: bool = False,
    seed: int = 0,
) -> DenseIndex:
    """Build and freeze an index from (chunk_id, vector) pairs."""
    index = DenseIndex(dims=dims, params=params, quantized=quantized, seed=seed)
    for chunk_id, vec in items:
        index.insert(chunk_id, vec)
    index.freeze()
    return index
