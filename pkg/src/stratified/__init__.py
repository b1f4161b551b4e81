"""Analysis and numerics for p-sub-Laplacians on stratified Lie groups."""
