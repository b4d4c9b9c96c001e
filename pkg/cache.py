import threading
from collections import OrderedDict
from functools import wraps
from typing import Any, Callable, Hashable

from config import CACHE_MAX_ENTRIES


class Cache:
    def __init__(self, max_entries: int = CACHE_MAX_ENTRIES):
        self._cache: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = threading.Lock()
        self.max_entries = max_entries

    def get(self, key: Hashable) -> Any:
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        return None

    def set(self, key: Hashable, value: Any) -> None:
        with self._lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self.max_entries:
                self._cache.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def __len__(self) -> int:
        return len(self._cache)


cache = Cache()


def cached(func: Callable) -> Callable:
    # Arguments must be hashable; results are shared, so callers must not mutate them
    @wraps(func)
    def wrapper(*args, **kwargs):
        key = (func.__qualname__, args, tuple(sorted(kwargs.items())))
        result = cache.get(key)
        if result is None:
            result = func(*args, **kwargs)
            cache.set(key, result)
        return result
    return wrapper
