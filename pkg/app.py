import sys

from dotenv import load_dotenv

from modules.LoggerHandler import init_logger

# .env may set CYLQ_LOG_DIR, so it is read before the logger is built
load_dotenv()
logger = init_logger("logger_config.json").get_logger()

from modules.main import CylinderLab  # noqa: E402  (modules log on import)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logger.debug(f"cylq {' '.join(argv)}", extra={"run": "Core"})
    return CylinderLab().run(argv)


if __name__ == "__main__":
    sys.exit(main())
