from . import config
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .routers import factors, simulations

config.configure_logging()

# Create App
app = FastAPI(
    title="Correlation Thresholding API",
    description="Factor-structure learning by correlation thresholding: fit, scan, simulate and benchmark.",
    version="1.0.0",
)

# ==========================================
# 1. SECURITY & CONFIGURATION
# ==========================================

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ==========================================
# 2. API ROUTERS
# ==========================================

app.include_router(factors.router, prefix="/api/factors", tags=["factors"])
app.include_router(simulations.router, prefix="/api/simulations", tags=["simulations"])


# ==========================================
# 3. HEALTH CHECK
# ==========================================

@app.get("/health")
async def health_check():
    """Deploy platforms poll this to check the app is alive."""
    return {"status": "healthy", "cache": "redis" if config.REDIS_URL else "memory"}
