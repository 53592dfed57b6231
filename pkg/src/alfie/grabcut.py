"""From-scratch GrabCut: GMM color models, graph construction, max-flow.

The segmentation energy is the classic one: per-pixel negative log
likelihood under the foreground/background color GMM (hard component
assignment) plus contrast-weighted smoothness on the 8-neighborhood,
minimized exactly per iteration by an s-t min cut. The min-cut solver is a
Boykov-Kolmogorov-style augmenting-path search with reused source/sink
trees, which is the standard choice for grid graphs from images.
"""

from __future__ import annotations

import warnings
from collections import deque
from typing import Callable

import numpy as np

from .trimap import PROB_BG, PROB_FG, SURE_BG, SURE_FG

__all__ = [
    "INF_CAP",
    "ColorGmm",
    "FlowGraph",
    "build_graph",
    "clean_alpha",
    "fit_gmm",
    "grabcut_refine",
    "max_flow",
]

INF_CAP = 1e9  # sentinel hard-constraint capacity, above any achievable finite cut
_EPS = 1e-12
_COV_REG = 1e-5
_LOG_2PI = float(np.log(2.0 * np.pi))


class ColorGmm:
    """K-component full-covariance Gaussian mixture over RGB triples.

    Components are scored with hard assignment: a pixel's cost is the best
    single component's -log(weight * N(z; mean, cov)). Empty components keep
    weight 0 and are excluded from scoring.
    """

    def __init__(self, weights: np.ndarray, means: np.ndarray, covs: np.ndarray):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.covs = np.asarray(covs, dtype=np.float64)
        self.k = self.weights.size
        self.inv_covs = np.stack([np.linalg.inv(c) for c in self.covs])
        self.log_dets = np.array([np.linalg.slogdet(c)[1] for c in self.covs])
        with np.errstate(divide="ignore"):
            self.log_weights = np.log(self.weights)

    @classmethod
    def from_assignments(cls, pixels: np.ndarray, labels: np.ndarray, k: int) -> "ColorGmm":
        """Estimate per-component weight/mean/covariance from hard assignments."""
        n = len(pixels)
        weights = np.zeros(k)
        means = np.zeros((k, 3))
        covs = np.tile(np.eye(3), (k, 1, 1))
        for comp in range(k):
            member = pixels[labels == comp]
            if len(member) == 0:
                continue
            weights[comp] = len(member) / n
            means[comp] = member.mean(axis=0)
            if len(member) > 1:
                covs[comp] = np.cov(member, rowvar=False)
            else:
                covs[comp] = np.zeros((3, 3))
            covs[comp] += _COV_REG * np.eye(3)  # flat regions give singular covariances
        return cls(weights, means, covs)

    def component_log_scores(self, pixels: np.ndarray) -> np.ndarray:
        """log(w_k * N(z; mean_k, cov_k)) per pixel and component, (M, K)."""
        pixels = np.atleast_2d(pixels)
        scores = np.empty((len(pixels), self.k))
        for comp in range(self.k):
            if self.weights[comp] <= 0:
                scores[:, comp] = -np.inf
                continue
            diff = pixels - self.means[comp]
            maha = np.einsum("ij,jk,ik->i", diff, self.inv_covs[comp], diff)
            scores[:, comp] = (
                self.log_weights[comp]
                - 0.5 * (self.log_dets[comp] + maha + 3.0 * _LOG_2PI)
            )
        return scores

    def assign(self, pixels: np.ndarray) -> np.ndarray:
        return np.argmax(self.component_log_scores(pixels), axis=1)

    def neg_log_likelihood(self, pixels: np.ndarray) -> np.ndarray:
        """Hard-assignment cost: -max_k log(w_k N_k), per pixel."""
        return -np.max(self.component_log_scores(pixels), axis=1)

    def refit(self, pixels: np.ndarray) -> "ColorGmm":
        """One learning step: reassign pixels to components, re-estimate params."""
        if len(pixels) == 0:
            return self
        return ColorGmm.from_assignments(pixels, self.assign(pixels), self.k)


def _kmeans_pp(pixels: np.ndarray, k: int, rng: np.random.Generator,
               max_iter: int = 20) -> np.ndarray:
    """k-means++ seeding plus Lloyd iterations; returns hard labels."""
    n = len(pixels)
    centers = np.empty((k, 3))
    centers[0] = pixels[rng.integers(n)]
    d2 = np.sum((pixels - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total))
            idx = min(idx, n - 1)
        centers[i] = pixels[idx]
        d2 = np.minimum(d2, np.sum((pixels - centers[i]) ** 2, axis=1))

    labels = None
    for _ in range(max_iter):
        dists = np.sum((pixels[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dists, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for comp in range(k):
            member = pixels[labels == comp]
            if len(member):
                centers[comp] = member.mean(axis=0)
    return labels


def fit_gmm(pixels: np.ndarray, k: int = 5, seed: int = 0) -> ColorGmm:
    """Fit a color GMM by k-means++ clustering and per-cluster moments."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(pixels) == 0:
        raise ValueError("cannot fit a GMM to zero pixels")
    if len(pixels) < k:
        warnings.warn(f"only {len(pixels)} pixels for K={k}; reducing K", stacklevel=2)
        k = len(pixels)
    rng = np.random.Generator(np.random.Philox(key=seed))
    labels = _kmeans_pp(pixels, k, rng)
    return ColorGmm.from_assignments(pixels, labels, k)


class FlowGraph:
    """s-t network: ``num_nodes`` pixel nodes plus implicit source and sink.

    T-links live in per-node capacity arrays; N-links are undirected
    (symmetric) edges between pixel nodes. All capacities must be >= 0.
    """

    def __init__(self, num_nodes: int):
        self.num_nodes = num_nodes
        self.source_cap = np.zeros(num_nodes)
        self.sink_cap = np.zeros(num_nodes)
        self._edge_u: list[np.ndarray] = []
        self._edge_v: list[np.ndarray] = []
        self._edge_cap: list[np.ndarray] = []

    def add_tlink(self, node: int, source_cap: float, sink_cap: float) -> None:
        if source_cap < 0 or sink_cap < 0:
            raise ValueError("capacities must be >= 0")
        self.source_cap[node] += source_cap
        self.sink_cap[node] += sink_cap

    def add_nlink(self, u, v, cap) -> None:
        """Add symmetric edges; accepts scalars or aligned arrays."""
        u = np.atleast_1d(np.asarray(u, dtype=np.intp))
        v = np.atleast_1d(np.asarray(v, dtype=np.intp))
        cap = np.broadcast_to(np.asarray(cap, dtype=np.float64), u.shape)
        if np.any(cap < 0):
            raise ValueError("capacities must be >= 0")
        self._edge_u.append(u)
        self._edge_v.append(v)
        self._edge_cap.append(np.array(cap))

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._edge_u:
            empty = np.empty(0)
            return empty.astype(np.intp), empty.astype(np.intp), empty
        return (
            np.concatenate(self._edge_u),
            np.concatenate(self._edge_v),
            np.concatenate(self._edge_cap),
        )


def max_flow(graph: FlowGraph) -> tuple[float, set[int]]:
    """Max flow / min cut via Boykov-Kolmogorov tree-reuse augmenting paths.

    Returns the flow value and the set of pixel nodes on the source side of
    the min cut (computed as residual reachability from the source, so the
    partition's cut value equals the returned flow exactly).

    T-links are folded into one per-node terminal residual
    ``tr = source_cap - sink_cap`` with ``min(source_cap, sink_cap)`` counted
    as trivially routed flow, halving the bookkeeping; arc pairs (a, a^1)
    hold the two directions of each N-link.
    """
    n = graph.num_nodes
    tr = (graph.source_cap - graph.sink_cap).tolist()
    flow = float(np.minimum(graph.source_cap, graph.sink_cap).sum())

    eu, ev, ecap = graph.edges()
    m = len(eu)
    head = [0] * (2 * m)
    cap = [0.0] * (2 * m)
    adj: list[list[int]] = [[] for _ in range(n)]
    for idx in range(m):
        u = int(eu[idx])
        v = int(ev[idx])
        c = float(ecap[idx])
        head[2 * idx] = v
        head[2 * idx + 1] = u
        cap[2 * idx] = c
        cap[2 * idx + 1] = c
        adj[u].append(2 * idx)
        adj[v].append(2 * idx + 1)

    FREE, SRC, SNK = 0, 1, 2
    NONE, TERMINAL = -1, -2
    tree = [FREE] * n
    parent = [NONE] * n
    active: deque[int] = deque()
    in_active = [False] * n
    orphans: deque[int] = deque()

    def activate(node: int) -> None:
        if not in_active[node]:
            in_active[node] = True
            active.append(node)

    for i in range(n):
        if tr[i] > _EPS:
            tree[i] = SRC
            parent[i] = TERMINAL
            activate(i)
        elif tr[i] < -_EPS:
            tree[i] = SNK
            parent[i] = TERMINAL
            activate(i)

    def is_rooted(node: int) -> bool:
        x = node
        while True:
            p = parent[x]
            if p == TERMINAL:
                return True
            if p == NONE:
                return False
            x = head[p ^ 1] if tree[x] == SRC else head[p]

    def augment(bridge: int) -> None:
        nonlocal flow
        u = head[bridge ^ 1]
        v = head[bridge]
        bottleneck = cap[bridge]
        x = u
        while parent[x] != TERMINAL:
            a = parent[x]
            if cap[a] < bottleneck:
                bottleneck = cap[a]
            x = head[a ^ 1]
        if tr[x] < bottleneck:
            bottleneck = tr[x]
        y = v
        while parent[y] != TERMINAL:
            a = parent[y]
            if cap[a] < bottleneck:
                bottleneck = cap[a]
            y = head[a]
        if -tr[y] < bottleneck:
            bottleneck = -tr[y]

        flow += bottleneck
        cap[bridge] -= bottleneck
        cap[bridge ^ 1] += bottleneck
        x = u
        while parent[x] != TERMINAL:
            a = parent[x]
            cap[a] -= bottleneck
            cap[a ^ 1] += bottleneck
            nxt = head[a ^ 1]
            if cap[a] <= _EPS:
                parent[x] = NONE
                orphans.append(x)
            x = nxt
        tr[x] -= bottleneck
        if tr[x] <= _EPS:
            parent[x] = NONE
            orphans.append(x)
        y = v
        while parent[y] != TERMINAL:
            a = parent[y]
            cap[a] -= bottleneck
            cap[a ^ 1] += bottleneck
            nxt = head[a]
            if cap[a] <= _EPS:
                parent[y] = NONE
                orphans.append(y)
            y = nxt
        tr[y] += bottleneck
        if tr[y] >= -_EPS:
            parent[y] = NONE
            orphans.append(y)

    def adopt() -> None:
        while orphans:
            x = orphans.popleft()
            tx = tree[x]
            found = NONE
            for a in adj[x]:
                q = head[a]
                if tree[q] != tx:
                    continue
                residual = cap[a ^ 1] if tx == SRC else cap[a]
                if residual <= _EPS:
                    continue
                if not is_rooted(q):
                    continue
                found = (a ^ 1) if tx == SRC else a
                break
            if found != NONE:
                parent[x] = found
                continue
            # no parent candidate: x leaves the tree entirely
            for a in adj[x]:
                q = head[a]
                if tree[q] != tx:
                    continue
                pa = parent[q]
                if pa >= 0:
                    q_parent = head[pa ^ 1] if tx == SRC else head[pa]
                    if q_parent == x:
                        parent[q] = NONE
                        orphans.append(q)
                residual = cap[a ^ 1] if tx == SRC else cap[a]
                if residual > _EPS:
                    activate(q)
            tree[x] = FREE
            parent[x] = NONE

    while active:
        p = active[0]
        if tree[p] == FREE:
            active.popleft()
            in_active[p] = False
            continue
        tp = tree[p]
        bridge = NONE
        for a in adj[p]:
            residual = cap[a] if tp == SRC else cap[a ^ 1]
            if residual <= _EPS:
                continue
            q = head[a]
            if tree[q] == FREE:
                tree[q] = tp
                parent[q] = a if tp == SRC else (a ^ 1)
                activate(q)
            elif tree[q] != tp:
                bridge = a if tp == SRC else (a ^ 1)
                break
        if bridge != NONE:
            augment(bridge)
            adopt()
        else:
            active.popleft()
            in_active[p] = False

    # canonical source side: residual reachability from the source
    source_side: set[int] = set()
    queue = deque(i for i in range(n) if tr[i] > _EPS)
    source_side.update(queue)
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            if cap[a] > _EPS:
                q = head[a]
                if q not in source_side:
                    source_side.add(q)
                    queue.append(q)
    return flow, source_side


def _squared_diffs(image: np.ndarray):
    """Per-offset squared color differences for the 8-neighborhood.

    Offsets (right, down, down-right, down-left) cover every unordered
    neighbor pair exactly once.
    """
    right = np.sum((image[:, 1:] - image[:, :-1]) ** 2, axis=2)
    down = np.sum((image[1:, :] - image[:-1, :]) ** 2, axis=2)
    down_right = np.sum((image[1:, 1:] - image[:-1, :-1]) ** 2, axis=2)
    down_left = np.sum((image[1:, :-1] - image[:-1, 1:]) ** 2, axis=2)
    return right, down, down_right, down_left


def _pairwise_edges(image: np.ndarray, gamma: float):
    """All N-link (u, v, capacity) arrays plus the contrast scale beta."""
    h, w = image.shape[:2]
    idx = np.arange(h * w).reshape(h, w)
    diffs = _squared_diffs(image)
    total = sum(float(d.sum()) for d in diffs)
    count = sum(d.size for d in diffs)
    mean_sq = total / count if count else 0.0
    beta = 0.0 if mean_sq <= 0 else 1.0 / (2.0 * mean_sq)  # constant image fallback

    pairs = [
        (idx[:, 1:], idx[:, :-1], diffs[0], 1.0),
        (idx[1:, :], idx[:-1, :], diffs[1], 1.0),
        (idx[1:, 1:], idx[:-1, :-1], diffs[2], np.sqrt(2.0)),
        (idx[1:, :-1], idx[:-1, 1:], diffs[3], np.sqrt(2.0)),
    ]
    us, vs, caps = [], [], []
    for u, v, sq, dist in pairs:
        us.append(u.ravel())
        vs.append(v.ravel())
        caps.append(gamma * np.exp(-beta * sq.ravel()) / dist)
    return np.concatenate(us), np.concatenate(vs), np.concatenate(caps), beta


def build_graph(
    image: np.ndarray,
    trimap: np.ndarray,
    current_mask: np.ndarray,
    gmm_fg: ColorGmm,
    gmm_bg: ColorGmm,
    gamma: float = 50.0,
) -> FlowGraph:
    """Assemble the GrabCut graph for one min-cut round.

    N-links: gamma * exp(-beta * |z_i - z_j|^2) / dist over the
    8-neighborhood with beta = 1 / (2 * mean squared neighbor difference).
    T-links: hard SURE labels get an INF_CAP link to their terminal; unknown
    pixels get the -log likelihood under the opposite side's GMM, shifted up
    per pixel by max(0, -min of the two) so capacities stay non-negative
    when a near-degenerate component drives a likelihood above 1 (a common
    per-pixel shift never changes the optimal partition).
    """
    h, w = image.shape[:2]
    if trimap.shape != (h, w) or current_mask.shape != (h, w):
        raise ValueError("image, trimap, and mask shapes must agree")
    if np.any((current_mask == 1) & (trimap == SURE_BG)) or np.any(
        (current_mask == 0) & (trimap == SURE_FG)
    ):
        raise ValueError("current_mask contradicts the trimap's SURE labels")

    graph = FlowGraph(h * w)
    us, vs, caps, _ = _pairwise_edges(np.asarray(image, dtype=np.float64), gamma)
    graph.add_nlink(us, vs, caps)

    flat_tri = trimap.ravel()
    pixels = np.asarray(image, dtype=np.float64).reshape(-1, 3)
    unknown = (flat_tri == PROB_BG) | (flat_tri == PROB_FG)
    if np.any(unknown):
        nll_bg = gmm_bg.neg_log_likelihood(pixels[unknown])
        nll_fg = gmm_fg.neg_log_likelihood(pixels[unknown])
        shift = np.maximum(0.0, -np.minimum(nll_bg, nll_fg))
        graph.source_cap[unknown] = nll_bg + shift
        graph.sink_cap[unknown] = nll_fg + shift
    graph.source_cap[flat_tri == SURE_FG] = INF_CAP
    graph.sink_cap[flat_tri == SURE_BG] = INF_CAP
    return graph


def _segmentation_energy(
    pixels: np.ndarray,
    mask_flat: np.ndarray,
    gmm_fg: ColorGmm,
    gmm_bg: ColorGmm,
    pair_u: np.ndarray,
    pair_v: np.ndarray,
    pair_cap: np.ndarray,
) -> float:
    fg = mask_flat == 1
    unary = 0.0
    if np.any(fg):
        unary += float(gmm_fg.neg_log_likelihood(pixels[fg]).sum())
    if np.any(~fg):
        unary += float(gmm_bg.neg_log_likelihood(pixels[~fg]).sum())
    pairwise = float(pair_cap[mask_flat[pair_u] != mask_flat[pair_v]].sum())
    return unary + pairwise


def grabcut_refine(
    image: np.ndarray,
    trimap: np.ndarray,
    iterations: int = 5,
    k: int = 5,
    gamma: float = 50.0,
    seed: int = 0,
    on_iteration: Callable[[int, np.ndarray, float], None] | None = None,
) -> np.ndarray:
    """Iterated GrabCut refinement; returns a binary foreground mask.

    The mask starts from the trimap (PROB_FG and SURE_FG are foreground).
    Each iteration refits the two GMMs from the current partition (k-means++
    initialization on the first pass, then component reassignment + moment
    re-estimation, the alternation that keeps the energy non-increasing),
    builds the graph, solves the min cut, and relabels unknown pixels. SURE
    labels never flip. ``on_iteration`` receives
    (index, mask copy, energy after the cut) per iteration.
    """
    image = np.asarray(image, dtype=np.float64)
    trimap = np.asarray(trimap)
    h, w = trimap.shape
    if image.shape != (h, w, 3):
        raise ValueError(f"expected (h, w, 3) image matching trimap, got {image.shape}")
    if not np.isin(trimap, (SURE_BG, PROB_BG, PROB_FG, SURE_FG)).all():
        raise ValueError("trimap contains labels outside the four known values")

    fg_seed = (trimap == PROB_FG) | (trimap == SURE_FG)
    if not fg_seed.any():
        raise ValueError("trimap has no foreground seed pixels")
    if fg_seed.all():
        raise ValueError("trimap has no background seed pixels")

    mask = fg_seed.astype(np.uint8)
    if iterations == 0:
        return mask

    pixels = image.reshape(-1, 3)
    mask_flat = mask.ravel()
    unknown = ((trimap == PROB_BG) | (trimap == PROB_FG)).ravel()
    pair_u, pair_v, pair_cap, _ = _pairwise_edges(image, gamma)

    gmm_fg = fit_gmm(pixels[mask_flat == 1], k, seed=2 * seed + 1)
    gmm_bg = fit_gmm(pixels[mask_flat == 0], k, seed=2 * seed + 2)

    for it in range(iterations):
        if it > 0:
            gmm_fg = gmm_fg.refit(pixels[mask_flat == 1])
            gmm_bg = gmm_bg.refit(pixels[mask_flat == 0])
        graph = build_graph(image, trimap, mask_flat.reshape(h, w), gmm_fg, gmm_bg, gamma)
        _, source_side = max_flow(graph)
        in_source = np.zeros(h * w, dtype=bool)
        in_source[list(source_side)] = True
        mask_flat = np.where(unknown, in_source.astype(np.uint8), mask_flat)
        if on_iteration is not None:
            energy = _segmentation_energy(
                pixels, mask_flat, gmm_fg, gmm_bg, pair_u, pair_v, pair_cap
            )
            on_iteration(it, mask_flat.reshape(h, w).copy(), energy)

    return mask_flat.reshape(h, w)


def clean_alpha(alpha: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the alpha estimate outside the GrabCut foreground mask."""
    alpha = np.asarray(alpha)
    if alpha.shape != mask.shape:
        raise ValueError(f"shape mismatch: {alpha.shape} vs {mask.shape}")
    return np.where(mask == 1, alpha, 0.0)
