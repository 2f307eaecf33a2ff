import curriplan.curriplan

curriplan.curriplan.run()
