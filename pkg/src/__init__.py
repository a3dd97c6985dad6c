# Sparse Sense - sparsified compressed-sensing experiments
