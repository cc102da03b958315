from dotenv import load_dotenv

load_dotenv()

__version__ = "1.0.0"

__all__ = ["__version__"]
