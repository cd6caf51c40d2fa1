from kaczlab.commands.compare import command as compare_command
from kaczlab.commands.gen import command as gen_command
from kaczlab.commands.phantom import command as phantom_command
from kaczlab.commands.run import command as run_command

__all__ = ["compare_command", "gen_command", "phantom_command", "run_command"]
