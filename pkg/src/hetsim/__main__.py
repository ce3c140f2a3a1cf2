from hetsim.cli import run

run()
