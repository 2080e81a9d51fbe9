"""
FastAPI service exposing the closed-form models.
"""

import math
from typing import Optional

from dotenv import load_dotenv
load_dotenv()  # Load .env file

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .conditioning import burst_threshold
from .errors import InstabilityError, PhononCountsError
from .models import (
    BackactionResult,
    CavityParams,
    GawbsMode,
    GawbsModel,
    ThermalLink,
    backaction_occupancy,
    conditional_g2,
    conditional_occupancy,
    gawbs_mode_roots,
    occupancy_ratio,
    thermal_coherence,
)
from .schemas import CountModel, DriveSide, herald_side_for
from .utils import get_logger


logger = get_logger("server")


class ConditionalRequest(BaseModel):
    """Heralded-state closed forms on a delay grid."""
    k: int = Field(..., ge=1, description="Heralding clicks")
    gamma_bar: float = Field(..., gt=0.0, description="Total damping (rad/s)")
    tau_ns: list[float] = Field(..., min_length=1, description="Delays after the last herald")
    side: DriveSide = Field(default=DriveSide.anti_stokes, description="Sideband of the herald clicks")
    n_ac: Optional[float] = Field(default=None, ge=0.0, description="Steady-state occupancy for absolute values")


class ConditionalResponse(BaseModel):
    k: int
    tau_ns: list[float]
    conditional_g2: list[float] = Field(..., description="g2 of the k-phonon subtracted state")
    occupancy_ratio: list[float] = Field(..., description="1 + k exp(-gamma_bar tau)")
    occupancy: Optional[list[float]] = Field(default=None, description="Heralded occupancy when n_ac is given")


class BackactionRequest(BaseModel):
    P_in_w: float = Field(..., gt=0.0, description="Input power (W)")
    side: DriveSide = Field(..., description="anti_stokes (red drive) or stokes (blue drive)")
    cavity: CavityParams = Field(default_factory=CavityParams)
    link: ThermalLink = Field(default_factory=ThermalLink)


class ThresholdRequest(BaseModel):
    lam: float = Field(..., ge=0.0, description="Mean counts per interval")
    n_intervals: int = Field(..., ge=1, description="Intervals scanned")
    epsilon: float = Field(default=0.1, gt=0.0, lt=1.0, description="Expected false rejections")
    model: CountModel = Field(default=CountModel.thermal)


app = FastAPI(
    title="phononcounts models",
    description="Closed-form phonon coherences, backaction steady states and burst thresholds",
    version=__version__,
)


@app.exception_handler(RequestValidationError)
async def validation_error_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _bad_request(exc: Exception) -> HTTPException:
    logger.warning(f"[Server] rejected request: {exc}")
    return HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "version": __version__}


@app.get("/api/models/coherence")
async def get_coherence(
    order: int = Query(..., description="2, 3 or 4"),
    gamma_bar: float = Query(..., gt=0.0, description="Total damping (rad/s)"),
    delays_ns: list[float] = Query(..., description="order - 1 consecutive delays"),
):
    """Thermal g^(n) at one set of consecutive delays."""
    try:
        if len(delays_ns) != order - 1:
            raise ValueError(f"order {order} needs {order - 1} delays, got {len(delays_ns)}")
        value = thermal_coherence(order, [d * 1e-9 for d in delays_ns], gamma_bar)
    except (PhononCountsError, ValueError) as exc:
        raise _bad_request(exc)
    return {
        "order": order,
        "delays_ns": delays_ns,
        "value": float(value),
        "zero_delay": float(math.factorial(order)),
    }


@app.post("/api/models/conditional", response_model=ConditionalResponse)
async def post_conditional(request: ConditionalRequest):
    """Conditional g2 and occupancy of the heralded state."""
    tau = [t * 1e-9 for t in request.tau_ns]
    try:
        g2 = [float(conditional_g2(request.k, t, request.gamma_bar)) for t in tau]
        ratio = [float(occupancy_ratio(request.k, t, request.gamma_bar)) for t in tau]
        occupancy = None
        if request.n_ac is not None:
            herald = herald_side_for(request.side)
            occupancy = [
                float(conditional_occupancy(request.k, herald, t, request.n_ac, request.gamma_bar)) for t in tau
            ]
    except PhononCountsError as exc:
        raise _bad_request(exc)
    return ConditionalResponse(
        k=request.k, tau_ns=request.tau_ns, conditional_g2=g2, occupancy_ratio=ratio, occupancy=occupancy
    )


@app.post("/api/models/backaction", response_model=BackactionResult)
async def post_backaction(request: BackactionRequest):
    """Steady-state occupancy and sideband rate at one input power."""
    try:
        return backaction_occupancy(request.P_in_w, request.cavity, request.link, request.side)
    except InstabilityError as exc:
        raise _bad_request(exc)


@app.post("/api/conditioning/threshold")
async def post_threshold(request: ThresholdRequest):
    """Burst rejection threshold for one interval width."""
    try:
        k_thr = burst_threshold(request.lam, request.n_intervals, request.epsilon, request.model)
    except PhononCountsError as exc:
        raise _bad_request(exc)
    return {"k_thr": k_thr, **request.model_dump(mode="json")}


@app.get("/api/modes", response_model=list[GawbsMode])
async def get_modes(
    m_max: int = Query(default=10, ge=1, le=200, description="Modes to solve"),
    alpha: Optional[float] = Query(default=None, description="Velocity ratio override"),
):
    """GAWBS transverse-mode frequencies for the default fiber."""
    try:
        model = GawbsModel() if alpha is None else GawbsModel(alpha=alpha)
        return gawbs_mode_roots(model, m_max)
    except (PhononCountsError, ValueError) as exc:
        raise _bad_request(exc)


def run_server(host: str = "127.0.0.1", port: int = 8000):
    """Run the server using uvicorn."""
    import uvicorn

    logger.info(f"[Server] starting at http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    import sys
    port = int(sys.argv[1]) if len(sys.argv) > 1 else 8000
    run_server(port=port)
