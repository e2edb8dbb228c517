# Module initialization file
# Estimators and fitted-model types: VAR, FastICA/LiNGAM, SVAR
