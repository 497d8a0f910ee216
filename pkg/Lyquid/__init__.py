# Lyquid package
