"""Wire round trip: the retrieval toolkit's HTTP client against a live
sidecar server, over a real socket."""

import socket
import threading
import time

import pytest
import uvicorn

from gen_sidecar.serving import ServeConfig, create_app

qreform_generation = pytest.importorskip("qreform.generation")


@pytest.fixture(scope="module")
def live_server(checkpoint_dir):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    app = create_app(ServeConfig(checkpoint=str(checkpoint_dir)))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("sidecar server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_generate_through_primary_client(live_server):
    client = qreform_generation.HttpGenerationClient(live_server)
    request = qreform_generation.GenerationRequest(
        prompt="refine : define visceral", num_return=3, beam_size=8, max_new_tokens=5
    )
    results = qreform_generation.generate(client, request)
    assert 1 <= len(results) <= 3
    assert all(r.log_likelihood <= 0 for r in results)
    lls = [r.log_likelihood for r in results]
    assert lls == sorted(lls, reverse=True)
    client.close()


def test_score_through_primary_client(live_server):
    client = qreform_generation.HttpGenerationClient(live_server)
    value = client.score("define visceral", "the viscera are internal organs")
    assert isinstance(value, float)
    client.close()


def test_input_too_long_surfaces_as_service_error(live_server):
    from qreform.errors import ServiceError

    client = qreform_generation.HttpGenerationClient(live_server)
    request = qreform_generation.GenerationRequest(prompt=" ".join(["water"] * 600))
    with pytest.raises(ServiceError, match="input_too_long"):
        client.generate(request)
    client.close()
