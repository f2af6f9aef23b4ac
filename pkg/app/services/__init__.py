# services package init
