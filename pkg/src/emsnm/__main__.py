from emsnm.harness.cli import main

raise SystemExit(main())
