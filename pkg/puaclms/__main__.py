import sys

from puaclms.main import cli_main

sys.exit(cli_main())
