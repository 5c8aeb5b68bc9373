"""Brute-force reference implementations used only by the tests."""

import heapq
import itertools
import math

import numpy as np


def prufer_trees(n):
    """Every labelled spanning tree of K_n, as a list of (u, v) with u < v."""
    if n == 1:
        yield []
        return
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        leaves = [i for i in range(n) if degree[i] == 1]
        heapq.heapify(leaves)
        edges = []
        for x in seq:
            leaf = heapq.heappop(leaves)
            edges.append((min(leaf, x), max(leaf, x)))
            degree[x] -= 1
            if degree[x] == 1:
                heapq.heappush(leaves, x)
        u, v = heapq.heappop(leaves), heapq.heappop(leaves)
        edges.append((min(u, v), max(u, v)))
        yield edges


def brute_force_mst_weight(n, weight):
    """Minimum total weight over all spanning trees of the complete graph."""
    return min(math.fsum(weight[u][v] for u, v in t) for t in prufer_trees(n))


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]


def direct_modularity(A, labels):
    """(1/2m) sum_ij (A_ij - k_i k_j / 2m) [c_i == c_j], summed element by element."""
    n = len(A)
    k = [sum(A[i][j] for j in range(n)) for i in range(n)]
    two_m = sum(k)
    if two_m == 0:
        return 0.0
    total = 0.0
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                total += A[i][j] - k[i] * k[j] / two_m
    return total / two_m


def max_modularity(A):
    n = len(A)
    best = -math.inf
    for part in set_partitions(range(n)):
        labels = [0] * n
        for c, block in enumerate(part):
            for x in block:
                labels[x] = c
        best = max(best, direct_modularity(A, labels))
    return best


def adjacency(n, edges):
    A = np.zeros((n, n))
    for u, v, w in edges:
        A[u, v] = A[v, u] = w
    return A
