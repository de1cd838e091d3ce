import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from gen_sidecar.model import make_checkpoint
from gen_sidecar.serving import ServeConfig, create_app

REPO_ROOT = Path(__file__).resolve().parents[2]
WIRE_SCHEMA_PATH = REPO_ROOT / "src" / "qreform" / "data" / "wire_schema.json"


@pytest.fixture(scope="session")
def wire_schema():
    # the exact schema file the retrieval toolkit's client tests use
    return json.loads(WIRE_SCHEMA_PATH.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "tiny"
    make_checkpoint(out, seed=0)
    return out


@pytest.fixture(scope="session")
def client(checkpoint_dir):
    app = create_app(ServeConfig(checkpoint=str(checkpoint_dir)))
    return TestClient(app)
