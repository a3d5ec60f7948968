"""
Cache for candidate fits and bootstrap refit evaluations.
Lets every criterion that shares a (candidate, mechanism) pair reuse one set
of B refits instead of refitting per criterion.
"""
import itertools
import logging
from dataclasses import dataclass, field
from threading import Lock
from typing import Any, Dict, Generic, Hashable, Optional, Tuple, TypeVar

from config import get_config


logger = logging.getLogger(__name__)

T = TypeVar('T')

# Global access counter that orders LRU eviction.
_ticks = itertools.count()


@dataclass
class CacheEntry(Generic[T]):
    """A cached value and when it was last read or written."""
    value: T
    last_accessed: int = field(default_factory=lambda: next(_ticks))

    def access(self) -> T:
        self.last_accessed = next(_ticks)
        return self.value


class LRUCache(Generic[T]):
    """Thread-safe LRU cache with batch eviction."""

    def __init__(self, max_size: int, cleanup_batch_size: int = 20):
        self.max_size = max_size
        self.cleanup_batch_size = cleanup_batch_size
        self._cache: Dict[Hashable, CacheEntry[T]] = {}
        self._lock = Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[T]:
        """Get a value from the cache."""
        with self._lock:
            entry = self._cache.get(key)
            if entry is None:
                self.misses += 1
                return None
            self.hits += 1
            return entry.access()

    def put(self, key: Hashable, value: T) -> None:
        """Put a value in the cache."""
        with self._lock:
            if key not in self._cache and len(self._cache) >= self.max_size:
                self._cleanup()
            self._cache[key] = CacheEntry(value)

    def size(self) -> int:
        with self._lock:
            return len(self._cache)

    def _cleanup(self) -> None:
        """Remove the least recently used entries."""
        batch = max(1, min(self.cleanup_batch_size, len(self._cache)))
        oldest = sorted(self._cache.items(), key=lambda item: item[1].last_accessed)[:batch]
        for key, _ in oldest:
            del self._cache[key]
        logger.debug(f"Cache cleanup: removed {batch} entries")


FitKey = Tuple[int, ...]


class RefitCache:
    """Fits keyed by candidate columns; refit evaluations keyed by (columns, mechanism, oob)."""

    def __init__(self, max_size: Optional[int] = None, cleanup_batch_size: Optional[int] = None):
        cache_config = get_config().cache
        max_size = max_size or cache_config.max_cache_size
        cleanup_batch_size = cleanup_batch_size or cache_config.cleanup_batch_size

        self.fit_cache = LRUCache[Any](max_size=max_size, cleanup_batch_size=cleanup_batch_size)
        self.replicate_cache = LRUCache[Any](max_size=max_size, cleanup_batch_size=cleanup_batch_size)

    def get_fit(self, columns: FitKey) -> Optional[Any]:
        return self.fit_cache.get(tuple(columns))

    def cache_fit(self, columns: FitKey, fit: Any) -> None:
        self.fit_cache.put(tuple(columns), fit)

    def get_replicates(self, columns: FitKey, mechanism: str, require_oob: bool) -> Optional[Any]:
        result = self.replicate_cache.get((tuple(columns), mechanism, require_oob))
        if result is not None:
            logger.debug(f"Reusing {mechanism} refits for columns {tuple(columns)}")
        return result

    def cache_replicates(self, columns: FitKey, mechanism: str, require_oob: bool, evaluations: Any) -> None:
        self.replicate_cache.put((tuple(columns), mechanism, require_oob), evaluations)

    def get_cache_stats(self) -> Dict[str, Any]:
        """Get statistics about cache usage."""
        return {
            'fit_cache_size': self.fit_cache.size(),
            'fit_cache_hits': self.fit_cache.hits,
            'replicate_cache_size': self.replicate_cache.size(),
            'replicate_cache_hits': self.replicate_cache.hits,
            'max_size': self.fit_cache.max_size,
        }
