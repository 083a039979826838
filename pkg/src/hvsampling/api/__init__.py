"""HTTP service layer: pydantic wire models and the FastAPI app."""
