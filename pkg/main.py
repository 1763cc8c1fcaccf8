from app.main import create_app, main

app = create_app()

if __name__ == "__main__":
    raise SystemExit(main())
