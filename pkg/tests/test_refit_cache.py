"""
Tests for the fit and refit caches.
"""
from services.refit_cache import LRUCache, RefitCache


def test_lru_evicts_least_recently_used():
    cache = LRUCache(max_size=2, cleanup_batch_size=1)
    cache.put("a", 1)
    cache.put("b", 2)
    assert cache.get("a") == 1
    cache.put("c", 3)
    assert cache.size() == 2
    assert cache.get("b") is None
    assert cache.get("a") == 1
    assert cache.get("c") == 3


def test_hits_and_misses():
    cache = LRUCache(max_size=4)
    assert cache.get("x") is None
    cache.put("x", 0)
    assert cache.get("x") == 0
    assert (cache.hits, cache.misses) == (1, 1)


def test_refit_keys_separate_mechanism_and_oob():
    cache = RefitCache(max_size=8)
    cache.cache_replicates((0, 1), "nonparametric", False, "plain")
    cache.cache_replicates((0, 1), "nonparametric", True, "oob")
    assert cache.get_replicates([0, 1], "nonparametric", False) == "plain"
    assert cache.get_replicates((0, 1), "nonparametric", True) == "oob"
    assert cache.get_replicates((0, 1), "parametric", False) is None
    stats = cache.get_cache_stats()
    assert stats["replicate_cache_size"] == 2
    assert stats["replicate_cache_hits"] == 2
    assert stats["fit_cache_size"] == 0
