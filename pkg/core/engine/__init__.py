"""
Motor numérico: matrices densas, autoencoder, Adam, entrenamiento DL/DDL
y baselines de factorización.
"""
