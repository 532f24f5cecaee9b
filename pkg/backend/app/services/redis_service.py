import hashlib
import json
import logging
import time

import redis.asyncio as redis

from .io_service import to_jsonable
from ..config import CACHE_MAX_ENTRIES, CACHE_TTL, REDIS_URL

logger = logging.getLogger("ResultCache")

# ==========================================
# 1. IN-MEMORY STORE (local / no redis)
# ==========================================


class MemoryStore:
    """Process-local key/value store with per-key expiry and a size cap (oldest entry evicted first)."""

    def __init__(self, max_entries: int = CACHE_MAX_ENTRIES):
        self.entries = {}
        self.max_entries = max_entries

    def get(self, key: str):
        hit = self.entries.get(key)
        if hit is None:
            return None
        expires, value = hit
        if expires is not None and time.time() >= expires:
            self.entries.pop(key, None)
            return None
        return value

    def set(self, key: str, value, ttl: int = None):
        now = time.time()
        self.purge(now)
        self.entries.pop(key, None)
        while len(self.entries) >= self.max_entries:
            self.entries.pop(next(iter(self.entries)))
        self.entries[key] = (now + ttl if ttl else None, value)

    def purge(self, now: float = None):
        now = time.time() if now is None else now
        for k in [k for k, (expires, _) in self.entries.items() if expires is not None and now >= expires]:
            del self.entries[k]

    def __len__(self):
        return len(self.entries)

    def clear(self):
        self.entries.clear()


# ==========================================
# 2. RESULT CACHE (redis with memory fallback)
# ==========================================

class RedisManager:
    def __init__(self, url: str = None):
        self.url = url
        self.redis = None
        self.use_redis = False
        self._checked = False
        self.memory = MemoryStore()

    async def _get_connection(self):
        if self._checked:
            return self.redis if self.use_redis else None

        self._checked = True
        if not self.url:
            logger.info("⚡ Result cache: no REDIS_URL, using local memory.")
            return None

        target = self.url.split("@")[-1] if "@" in self.url else "HIDDEN"
        try:
            pool = redis.ConnectionPool.from_url(self.url, decode_responses=True, socket_connect_timeout=2)
            r = redis.Redis(connection_pool=pool)
            await r.ping()
            logger.info(f"✅ Result cache: redis connected ({target}).")
            self.redis = r
            self.use_redis = True
        except Exception as e:
            logger.warning(f"❌ Redis connection to {target} failed ({e}); using local memory.")
            self.use_redis = False
        return self.redis if self.use_redis else None

    async def get_cache(self, key: str):
        r = await self._get_connection()
        if r:
            try:
                data = await r.get(key)
                return json.loads(data) if data else None
            except Exception as e:
                logger.warning(f"⚠️ Cache read failed for {key}: {e}")
                return None
        return self.memory.get(key)

    async def set_cache(self, key: str, data, ttl: int = CACHE_TTL):
        payload = to_jsonable(data)
        r = await self._get_connection()
        if r:
            try:
                await r.set(key, json.dumps(payload), ex=ttl)
            except Exception as e:
                logger.warning(f"⚠️ Cache write failed for {key}: {e}")
            return
        self.memory.set(key, payload, ttl)


def request_key(prefix: str, payload) -> str:
    """Stable cache key: prefix + SHA-1 of the canonical JSON of the request."""
    text = json.dumps(to_jsonable(payload), sort_keys=True, separators=(",", ":"))
    return f"{prefix}:{hashlib.sha1(text.encode('utf-8')).hexdigest()}"


# Singleton Export
redis_client = RedisManager(REDIS_URL)
