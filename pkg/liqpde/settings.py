import os

from dotenv import load_dotenv

load_dotenv()

REGISTRY_URL = os.environ.get("LIQPDE_REGISTRY_URL", "sqlite:///liqpde_runs.db")

OUT_DIR = os.environ.get("LIQPDE_OUT_DIR", "out")

LOG_LEVEL = os.environ.get("LIQPDE_LOG_LEVEL", "INFO")

BATCH_SIZE = int(os.environ.get("LIQPDE_BATCH_SIZE", "2048"))
