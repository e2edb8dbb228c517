# Module initialization file
# Series handling, simulation, fence graphs and the error hierarchy
