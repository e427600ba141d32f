import pathlib

import pytest

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def corpus_texts():
    return {p.stem: p.read_text() for p in sorted(DATA.glob("*.bench"))}


@pytest.fixture(scope="session")
def corpus(corpus_texts):
    from tpilab.bench import parse_bench

    return {name: parse_bench(text, name=name) for name, text in corpus_texts.items()}
