from crgame.cli import main

main()
