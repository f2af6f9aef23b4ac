# learning package init
