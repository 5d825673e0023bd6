from pathlib import Path

import pytest

from typechain.frontend import parse_source
from typechain.interp import run_program
from typechain.typesys import check_program

CORPUS = Path(__file__).parent / "corpus"

LISTING1 = """\
var a:Int;
var b:Int :: allocated[single[on[0]]];
var c:Int :: allocated[single[on[0]]] :: channel[0,1];
"""

LISTING2 = """\
function Int fib(var val:Int) : spawnable {
    if (val == 0 || val == 1) return val;
    var f1,f2 : Future[Int];
    f1:=fib(val-1);
    f2:=fib(val-2);
    synchronise(f1);
    synchronise(f2);
    return f1.val + f2.val;
}
"""

LISTING3 = """\
function Int fib(var val:Int) : spawnable {
    if (val == 0 || val == 1) return val;
    var f1,f2 : Future[Int];
    f1:=fib(val-1);
    f2:=fib(val-2);
    return add(f1, f2);
}

function Int add(var a:Int, var b:Int) : spawnable :: dependencies {
    return a + b;
}
"""


def fib_driver(listing: str, n: int) -> str:
    return listing + f"var r:Int;\nr := synchronise(fib({n}));\n"


def checked(source: str):
    program = parse_source(source)
    diags = check_program(program)
    assert diags == [], diags
    return program


def run_source(source: str, **kwargs):
    return run_program(checked(source), **kwargs)


def corpus_files():
    return sorted(CORPUS.glob("*.tl"))


@pytest.fixture
def listing_sources():
    return {"listing1": LISTING1, "listing2": LISTING2, "listing3": LISTING3}


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
