"""
Color constants for terminal output
"""

try:
    from colorama import Fore, Style, init

    init(autoreset=True)

    class Colors:
        """Color constants for terminal output"""

        RED = Fore.RED
        GREEN = Fore.GREEN
        YELLOW = Fore.YELLOW
        BLUE = Fore.BLUE
        BOLD = Style.BRIGHT
        RESET = Style.RESET_ALL

except ImportError:
    # Fallback for environments without colorama
    class Colors:  # type: ignore[no-redef]
        RED = ""
        GREEN = ""
        YELLOW = ""
        BLUE = ""
        BOLD = ""
        RESET = ""


STATUS_COLORS = {
    "committed": "GREEN",
    "no-op": "YELLOW",
    "reverted": "YELLOW",
}


def colorize(text: str, color: str) -> str:
    return f"{getattr(Colors, color)}{text}{Colors.RESET}"


def status_label(status: str) -> str:
    """Adaptation outcome in its display color, upper-cased"""
    return colorize(status.upper(), STATUS_COLORS.get(status, "RED"))
