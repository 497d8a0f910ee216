# Lyquids package
