"""Run the console and pycon snippets in README.md."""
import doctest
import re
import shlex
from pathlib import Path

import pytest

from wgbih.cli import main

README = Path(__file__).resolve().parents[1] / "README.md"
TEXT = README.read_text()
CONSOLE = re.findall(r"```console\n(.*?)```", TEXT, re.S)
PYCON = re.findall(r"```pycon\n(.*?)```", TEXT, re.S)


def lines_match(expected, actual):
    pending = [ln.strip() for ln in actual.splitlines()]
    for want in (ln.strip() for ln in expected):
        if not want:
            continue
        if want.endswith("..."):
            prefix = want[:-3]
            assert any(got.startswith(prefix) for got in pending), f"no line starting with {prefix!r}"
        else:
            assert want in pending, f"missing line {want!r}"


@pytest.mark.parametrize("block", CONSOLE, ids=[b.splitlines()[0][2:40] for b in CONSOLE])
def test_console_snippet(block, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    command, *expected = block.splitlines()
    assert command.startswith("$ wgbih ")
    code = main(shlex.split(command)[2:])
    out = capsys.readouterr()
    want_error = any(ln.startswith("error:") for ln in expected)
    assert (code != 0) == want_error
    lines_match(expected, out.err if want_error else out.out)
    if "--out" in command:
        assert (tmp_path / shlex.split(command)[-1]).exists()


def test_pycon_snippets():
    assert PYCON
    parser = doctest.DocTestParser()
    runner = doctest.DocTestRunner(optionflags=doctest.ELLIPSIS)
    for i, block in enumerate(PYCON):
        runner.run(parser.get_doctest(block, {}, f"README[{i}]", str(README), 0))
    result = runner.summarize(verbose=False)
    assert result.failed == 0


def test_no_em_dash_in_readme():
    assert "—" not in TEXT
