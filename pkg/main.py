"""cpush 실행 진입점 — 하위 명령은 cpush/cli.py 참고."""
import sys


def main():
    from cpush.cli import main as cli_main
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
