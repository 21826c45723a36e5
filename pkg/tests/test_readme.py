import re
import shlex
from pathlib import Path

import pytest

from promiselab.cli import main

ROOT = Path(__file__).resolve().parent.parent


def documented_commands():
    text = (ROOT / "README.md").read_text()
    blocks = re.findall(r"```sh\n(.*?)```", text, re.S)
    return [line for b in blocks for line in b.splitlines() if line.startswith("promiselab ")]


def test_readme_documents_every_subcommand():
    used = {shlex.split(c)[1] for c in documented_commands()}
    assert used == {"validate", "analyze", "simulate", "markov"}


def test_documented_commands_run(tmp_path, monkeypatch, capsys):
    # outputs land in tmp_path; model paths resolve through the linked src/
    (tmp_path / "src").symlink_to(ROOT / "src")
    monkeypatch.chdir(tmp_path)
    for line in documented_commands():
        assert main(shlex.split(line)[1:]) == 0, line
    assert (tmp_path / "partition_report.yaml").exists()
    assert (tmp_path / "chain.jsonl").exists()
    assert "consistent" in capsys.readouterr().out


@pytest.mark.parametrize("script", sorted((ROOT / "scripts").glob("*.py")), ids=lambda p: p.stem)
def test_scripts_are_documented(script):
    assert f"scripts/{script.name}" in (ROOT / "README.md").read_text()
