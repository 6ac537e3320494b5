"""HTTP prediction service over a trained blend bundle.

The bundle is loaded once at startup and never mutated, so identical
request bodies always produce identical responses.  Scores are rounded to
6 decimal places before serialization.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import bundle as bundle_mod

log = logging.getLogger(__name__)

MAX_BATCH = 1000


class PredictRequest(BaseModel):
    smiles: list[str] = Field(..., description="SMILES strings to score")
    targets: list[str] | None = Field(
        None, description="Optional subset of bundle targets")


def create_app(bundle_dir: str | Path | None,
               max_batch: int = MAX_BATCH) -> FastAPI:
    """Build the app; ``bundle_dir=None`` starts without a bundle (all
    prediction endpoints answer 503)."""
    app = FastAPI(title="toxscreen", version="1")
    bundle = None
    if bundle_dir is not None:
        bundle = bundle_mod.load_bundle(Path(bundle_dir))
        log.info("loaded bundle %s (checksum %s)", bundle_dir,
                 bundle.checksum[:12])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request,
                             exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400,
                            content={"detail": exc.errors()})

    def _require_bundle() -> JSONResponse | None:
        if bundle is None:
            return JSONResponse(status_code=503,
                                content={"detail": "no bundle loaded"})
        return None

    @app.post("/v1/predict")
    async def predict(request: PredictRequest):
        missing = _require_bundle()
        if missing is not None:
            return missing
        if not request.smiles:
            return JSONResponse(status_code=400,
                                content={"detail": "empty SMILES list"})
        if len(request.smiles) > max_batch:
            return JSONResponse(
                status_code=413,
                content={"detail": f"batch of {len(request.smiles)} exceeds "
                                   f"the limit of {max_batch}"})
        if request.targets is not None:
            unknown = sorted(set(request.targets) - set(bundle.targets))
            if unknown:
                return JSONResponse(
                    status_code=400,
                    content={"detail": f"unknown targets: {unknown}"})
        results = bundle_mod.predict_smiles(bundle, request.smiles)
        if request.targets is not None:
            wanted = set(request.targets)
            for entry in results:
                if "targets" in entry:
                    entry["targets"] = [row for row in entry["targets"]
                                        if row["target"] in wanted]
        return {"results": results}

    @app.get("/v1/targets")
    async def targets():
        missing = _require_bundle()
        if missing is not None:
            return missing
        return {"targets": [
            {"target": target, "family": bundle.families[t],
             "auc": bundle.target_aucs.get(target)}
            for t, target in enumerate(bundle.targets)
        ]}

    @app.get("/v1/health")
    async def health():
        if bundle is None:
            return JSONResponse(
                status_code=503,
                content={"status": "no bundle", "bundle_checksum": None})
        return {"status": "ok", "bundle_checksum": bundle.checksum}

    return app
