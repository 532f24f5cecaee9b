import asyncio
import logging
from functools import wraps

from fastapi import HTTPException
from pydantic import ValidationError

from ..utils.errors import CTError

logger = logging.getLogger("Watchdog")


def _translate(func_name: str, exc: Exception) -> HTTPException:
    if isinstance(exc, CTError):
        logger.warning(f"🛡️ [WATCHDOG] {func_name}: {type(exc).__name__}: {exc.message}")
        return HTTPException(status_code=exc.status_code, detail={"error": type(exc).__name__, "message": exc.message})
    if isinstance(exc, ValidationError):
        logger.warning(f"🛡️ [WATCHDOG] {func_name}: invalid configuration")
        return HTTPException(status_code=400, detail={"error": "ValidationError", "message": str(exc)})
    logger.exception(f"🛡️ [WATCHDOG] Unexpected crash in {func_name}")
    return HTTPException(status_code=500, detail={"error": "InternalError", "message": str(exc)})


def guard_errors(func):
    """
    Router decorator. Domain errors become HTTP errors carrying the error's status code;
    anything else is logged with its traceback and returned as a 500.
    """

    @wraps(func)
    def sync_wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HTTPException:
            raise
        except Exception as e:
            raise _translate(func.__name__, e)

    @wraps(func)
    async def async_wrapper(*args, **kwargs):
        try:
            return await func(*args, **kwargs)
        except HTTPException:
            raise
        except Exception as e:
            raise _translate(func.__name__, e)

    if asyncio.iscoroutinefunction(func):
        return async_wrapper
    return sync_wrapper
