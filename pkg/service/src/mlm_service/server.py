"""HTTP surface implementing the prediction wire protocol.

Routes and status codes follow the shared protocol document:
GET /handshake and POST /predict, 400 for anything wrong with the
request itself (including mask-count violations), 503 while no model
is loaded. Responses depend only on the loaded checkpoint and the
request body.
"""

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import MaskCountError
from .predict import MlmPredictor


class PredictRequest(BaseModel):
    text: str
    top_k: int


def build_app(predictor: MlmPredictor | None) -> FastAPI:
    """App around one optional predictor; None serves 503s."""
    app = FastAPI(title="mlm-service", docs_url=None, redoc_url=None)
    state = {"predictor": predictor}
    app.state.predictor_holder = state

    def _not_loaded() -> JSONResponse:
        return JSONResponse(status_code=503, content={"error": "model not loaded"})

    @app.exception_handler(RequestValidationError)
    async def _malformed(request, exc) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": f"malformed request: {exc}"})

    @app.get("/handshake")
    def handshake():
        p = state["predictor"]
        if p is None:
            return _not_loaded()
        return p.handshake()

    @app.post("/predict")
    def predict(req: PredictRequest):
        p = state["predictor"]
        if p is None:
            return _not_loaded()
        if req.top_k < 1:
            return JSONResponse(
                status_code=400, content={"error": f"top_k must be >= 1, got {req.top_k}"}
            )
        try:
            preds = p.predict(req.text, req.top_k)
        except MaskCountError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return {"predictions": [{"token": p.token, "score": p.score} for p in preds]}

    return app
