"""HTTP task-distribution API over the engine.

Thin FastAPI layer: routes validate shapes, delegate to the engine, and map
domain errors onto status codes. Patch images are served as cropped PNGs by
URL so question pages stay small. Also hosts the polygon annotation intake
used by the polygon-versus-attention comparison mode.
"""
from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from PIL import Image as PilImage
from pydantic import BaseModel

from .aggregation import TaskKind
from .engine import Engine
from .errors import (
    DegeneratePolygonError,
    DuplicateSubmissionError,
    LeaseExpiredError,
    QuotaNotMetError,
    SubmissionMismatchError,
    UnknownEntityError,
    WrongStateError,
)
from .patching import crop_patch
from .raster import GrayMask, RasterImage, mask_to_bytes

PGM_MEDIA_TYPE = "image/x-portable-graymap"

_ERROR_STATUS = (
    (UnknownEntityError, 404),
    (LeaseExpiredError, 410),
    (DuplicateSubmissionError, 409),
    (QuotaNotMetError, 409),
    (WrongStateError, 409),
    (SubmissionMismatchError, 422),
    (DegeneratePolygonError, 422),
    (ValueError, 422),
)


def rasterize_polygon(points: list[tuple[float, float]], image_w: int, image_h: int) -> GrayMask:
    """Even-odd scanline fill; a pixel is positive iff its center is inside."""
    if len(points) < 3:
        raise DegeneratePolygonError(f"polygon needs at least 3 points, got {len(points)}")
    area = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    if area == 0.0:
        raise DegeneratePolygonError("polygon has zero area")
    out = np.zeros((image_h, image_w), dtype=np.float64)
    for row in range(image_h):
        yc = row + 0.5
        crossings = []
        for i in range(n):
            x0, y0 = points[i]
            x1, y1 = points[(i + 1) % n]
            if (y0 <= yc < y1) or (y1 <= yc < y0):
                t = (yc - y0) / (y1 - y0)
                crossings.append(x0 + t * (x1 - x0))
        crossings.sort()
        for xa, xb in zip(crossings[0::2], crossings[1::2]):
            # pixel centers x + 0.5 in [xa, xb)
            start = max(0, int(np.ceil(xa - 0.5)))
            stop = min(image_w, int(np.ceil(xb - 0.5)))
            if stop > start:
                out[row, start:stop] = 1.0
    return GrayMask(out)


def saliency_overlay(image: RasterImage, mask: GrayMask) -> RasterImage:
    """Dim the image where the saliency map is low, for verify questions."""
    weights = (0.35 + 0.65 * mask.values)[:, :, np.newaxis]
    blended = np.floor(image.pixels.astype(np.float64) * weights + 0.5)
    return RasterImage(blended.astype(np.uint8))


def _png_bytes(image: RasterImage) -> bytes:
    if image.pixels.shape[2] == 1:
        pil = PilImage.fromarray(image.pixels[:, :, 0], mode="L")
    else:
        pil = PilImage.fromarray(image.pixels, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


class JobRequest(BaseModel):
    imageId: str
    classLabel: str = "object"
    config: dict | None = None


class AnswersRequest(BaseModel):
    workerId: str
    answers: list[bool]
    elapsedMs: float


class PolygonRequest(BaseModel):
    imageId: str
    workerId: str
    points: list[tuple[float, float]]
    elapsedMs: float = 0.0


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="patchlab", docs_url=None, redoc_url=None)
    app.state.engine = engine

    def _register(exc_type, status):
        async def handler(request, exc):
            return JSONResponse({"error": str(exc)}, status_code=status)

        app.add_exception_handler(exc_type, handler)

    for exc_type, status in _ERROR_STATUS:
        _register(exc_type, status)

    @app.post("/jobs")
    def post_job(body: JobRequest):
        job_id = engine.create_job(body.imageId, body.classLabel, body.config)
        return {"jobId": job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return engine.job_status(job_id)

    @app.get("/jobs/{job_id}/mask")
    def get_mask(job_id: str):
        mask = engine.current_mask(job_id)
        return Response(content=mask_to_bytes(mask), media_type=PGM_MEDIA_TYPE)

    @app.get("/jobs/{job_id}/report")
    def get_report(job_id: str):
        return engine.job_report(job_id)

    @app.get("/workers/{worker_id}/next-page")
    def get_next_page(worker_id: str):
        page = engine.next_page(worker_id)
        if page is None:
            return Response(status_code=204)
        return engine.page_payload(page)

    @app.post("/pages/{token}/answers")
    def post_answers(token: str, body: AnswersRequest):
        return engine.submit_page(token, body.workerId, body.answers, body.elapsedMs)

    @app.post("/polygons")
    def post_polygon(body: PolygonRequest):
        return engine.submit_polygon(body.imageId, body.workerId, body.points, body.elapsedMs)

    @app.get("/patches/{task_file}")
    def get_patch(task_file: str):
        if not task_file.endswith(".png"):
            raise UnknownEntityError(f"unknown patch resource {task_file!r}")
        view = engine.task_view(task_file[: -len(".png")])
        if view["kind"] == TaskKind.SALIENCY_VERIFY:
            rendered = saliency_overlay(view["image"], view["saliency"])
        else:
            rendered = crop_patch(view["image"], view["rect"])
        return Response(content=_png_bytes(rendered), media_type="image/png")

    return app
