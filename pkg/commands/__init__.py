# Module initialization file
# One module per subcommand, each exposing add_parser() and run()
