# quantum package init
