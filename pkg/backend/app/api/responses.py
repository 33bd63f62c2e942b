"""
JSON responses in the canonical encoding, which also carries non-finite floats.
"""
from typing import Any

from fastapi.responses import JSONResponse

from app.core.serialization import canonical_dumps


class CanonicalJSONResponse(JSONResponse):
    def render(self, content: Any) -> bytes:
        return canonical_dumps(content).encode("utf-8")
