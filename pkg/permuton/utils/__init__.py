# Permuton utilities package
