from cache import Cache, cached
from gaussian_rates import ChannelParams
from region_geometry import RegionHandle, boundary_slice


class TestCache:

    def test_evicts_least_recently_used(self):
        store = Cache(max_entries=2)
        store.set("a", 1)
        store.set("b", 2)
        store.get("a")
        store.set("c", 3)
        assert store.get("b") is None
        assert (store.get("a"), store.get("c")) == (1, 3)
        assert len(store) == 2

    def test_cached_calls_once_per_key(self, clean_cache):
        calls = []

        @cached
        def square(x):
            calls.append(x)
            return x * x

        assert square(3) == square(3) == 9
        assert square(4) == 16
        assert calls == [3, 4]

    def test_slices_are_memoized(self, clean_cache):
        handle = RegionHandle.create("gaussian-bc", ChannelParams(P=10.0, N1=1.0, N2=4.0), alpha=5)
        first = boundary_slice(handle, 0.0, 5)
        assert boundary_slice(handle, 0.0, 5) is first
        assert len(clean_cache) == 1
