# Permuton runner package
