from novaq.cli import main

raise SystemExit(main())
