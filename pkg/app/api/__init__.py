# api package init
