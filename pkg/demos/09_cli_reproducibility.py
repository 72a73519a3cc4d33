"""Every CLI run writes its canonical config and digest; rerunning it reproduces the output."""
import json
import pathlib
import tempfile

from amlab.cli import main

with tempfile.TemporaryDirectory() as tmp:
    a, b = pathlib.Path(tmp, "a"), pathlib.Path(tmp, "b")
    main(["am-run", "--n", "20000", "--replicas", "3", "--seed", "42", "--out", str(a), "--plot"])
    main(["am-run", "--config", str(a / "config.json"), "--out", str(b)])
    cfg = json.loads((a / "config.json").read_text())
    print("config_digest:", cfg["config_digest"])
    same = all((a / n).read_bytes() == (b / n).read_bytes()
               for n in ("am_run.json", "trace_0.csv", "trace_1.csv", "trace_2.csv"))
    print("rerun from config.json is byte-identical:", same)
    print("exit code for a schedule that violates the conditions:",
          main(["check-schedule", "--schedule", "power:1,0.4", "--out", str(pathlib.Path(tmp, "c"))]))
