from kmsgraph.main import main

raise SystemExit(main())
