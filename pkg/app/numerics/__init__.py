# numerics package init
