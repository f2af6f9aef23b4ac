# data package init
