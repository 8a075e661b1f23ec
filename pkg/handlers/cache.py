"""
Cache Handler
=============

Command handlers for inspecting and clearing the profile cache.
"""

import logging
from typing import Optional

from services.cache_service import ProfileCache
from utils.formatting import format_error_response, format_success_response

logger = logging.getLogger(__name__)


class CacheHandler:
    """Handler for cache maintenance."""

    def __init__(self, cache: Optional[ProfileCache] = None):
        self.cache = cache or ProfileCache()

    async def info(self) -> str:
        try:
            logger.info(f"Inspecting profile cache at {self.cache.root}")
            return format_success_response(self.cache.info())

        except Exception as e:
            logger.error(f"Error inspecting cache: {e}")
            return format_error_response(e)

    async def clear(self) -> str:
        try:
            removed = self.cache.clear()
            return format_success_response({"root": str(self.cache.root), "removed": removed})

        except Exception as e:
            logger.error(f"Error clearing cache: {e}")
            return format_error_response(e)
